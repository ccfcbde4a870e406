"""Quad-stream BiLSTM-attention modulation classifier.

End-to-end stack: signal synthesis and preprocessing, a self-contained
reverse-mode autodiff engine with every required layer, network assembly
with complexity accounting, the training recipe, and the evaluation and
reporting suite. See the README for the CLI entry points.
"""

__version__ = "0.1.0"
