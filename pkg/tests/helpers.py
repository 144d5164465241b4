"""Independent reference implementations used to check the search machinery.

These deliberately re-derive the decoding semantics with plain loops and
direct oracle queries so the beam search has something honest to agree with.
"""

from __future__ import annotations

import itertools
import math

from tempadapt.templates import Literal, Slot, Template, aggregate_loglik


def runs_to_template(runs, loglik=None):
    elements = []
    for run, kind in zip(runs, ("U", "T1", "V", "T2")):
        elements.extend(Literal(t) for t in run)
        elements.append(Slot(kind=kind))
    return Template(tuple(elements), origin="auto", loglik=loglik)


def _closure_wins(oracle, tuples, pairs, t1, t2, runs_so_far, slot_index, vocab):
    """Does the upcoming non-slot token outrank every vocabulary token,
    summing over tuples, at the current decode point?"""
    totals = [0.0] * len(vocab)
    close = 0.0
    for tup in tuples:
        s1, _ = pairs[(tup.w, tup.u, tup.v)]
        anchors = (tup.u, t1, tup.v, t2)
        prefix = list(s1)
        for i in range(slot_index + 1):
            prefix.extend(runs_so_far[i])
            if i < slot_index:
                prefix.append(anchors[i])
        candidates = [[t] for t in vocab] + [[anchors[slot_index]]]
        values = oracle.logprob(prefix, candidates)
        for j in range(len(vocab)):
            totals[j] += values[j]
        close += values[-1]
    return close > max(totals) if vocab else True


def reachable(oracle, tuples, pairs, t1, t2, runs, vocab, max_slot_len):
    """Whether a complete slot filling is consistent with the closure rule."""
    for slot_index in range(4):
        run = runs[slot_index]
        if len(run) > max_slot_len:
            return False
        for pos in range(len(run) + 1):
            partial = tuple(runs[:slot_index]) + (run[:pos],) + ((),) * (3 - slot_index)
            wins = _closure_wins(oracle, tuples, pairs, t1, t2, partial, slot_index, vocab)
            if pos < len(run):
                if wins:
                    return False
            else:
                if not wins and len(run) < max_slot_len:
                    return False
    return True


def exhaustive_search(oracle, tuples, pairs, t1, t2, vocab, max_slot_len):
    """Enumerate every reachable slot filling with its summed log-likelihood,
    best first (ties broken on the runs tuple)."""
    per_slot = []
    for length in range(max_slot_len + 1):
        per_slot.extend(itertools.product(vocab, repeat=length))
    results = []
    for runs in itertools.product(per_slot, repeat=4):
        if not reachable(oracle, tuples, pairs, t1, t2, runs, vocab, max_slot_len):
            continue
        ll = aggregate_loglik(runs_to_template(runs), tuples, oracle, pairs, t1, t2)
        results.append((ll, runs))
    results.sort(key=lambda item: (-item[0], item[1]))
    return results


def greedy_decode(oracle, tuples, pairs, t1, t2, vocab, max_slot_len):
    """Single-path decoding: best vocabulary token each step, closure by the
    same outranking rule."""
    runs = [(), (), (), ()]
    loglik = 0.0
    for slot_index in range(4):
        while len(runs[slot_index]) < max_slot_len:
            totals = [0.0] * len(vocab)
            close = 0.0
            for tup in tuples:
                s1, _ = pairs[(tup.w, tup.u, tup.v)]
                anchors = (tup.u, t1, tup.v, t2)
                prefix = list(s1)
                for i in range(slot_index + 1):
                    prefix.extend(runs[i])
                    if i < slot_index:
                        prefix.append(anchors[i])
                candidates = [[t] for t in vocab] + [[anchors[slot_index]]]
                values = oracle.logprob(prefix, candidates)
                for j in range(len(vocab)):
                    totals[j] += values[j]
                close += values[-1]
            if close > max(totals):
                break
            best = min(range(len(vocab)), key=lambda j: (-totals[j], vocab[j]))
            runs[slot_index] = runs[slot_index] + (vocab[best],)
            loglik += totals[best]
    return tuple(runs), loglik
