"""wsrkit: wireless signal recognition toolkit.

Shrinkage residual networks over IQ samples, semi-supervised training on
mixed labeled/unlabeled batches, and a synthetic modulation generator so
experiments run end to end on a CPU.
"""

__version__ = "0.1.0"
