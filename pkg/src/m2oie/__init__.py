"""Desk-scale neural open information extraction.

A two-step tagging pipeline: a transformer encoder feeds a predicate
tagger, and each predicate conditions a stack of cross-attention blocks
that tag its arguments.  Everything runs on a small numpy-backed
autograd engine; no GPU or pretrained weights involved.
"""

__version__ = "0.1.0"
