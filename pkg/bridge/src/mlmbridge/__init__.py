"""Neural-runtime bridge for the temporal adaptation toolkit.

Talks to the core exclusively through files and a stream protocol: it reads
the masked training file and snapshot sentence exports, emits embedding
exchange files and results TSVs, and serves token likelihoods over
newline-delimited JSON.
"""

__version__ = "0.1.0"
