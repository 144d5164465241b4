"""Temporal semantic-shift mining and prompt generation for MLM time adaptation.

The pipeline takes two corpus snapshots, finds pivot words whose anchor
associations differ between the timestamps, fills or induces time-sensitive
templates, and emits masked training instances; a separate neural bridge
handles embedding extraction, likelihood serving, fine-tuning, and
perplexity evaluation through file and stream interfaces.
"""

__version__ = "0.1.0"
