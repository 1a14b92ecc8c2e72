"""Toolkit for predicting which wrist a wearable device is worn on.

Pipeline stages: ingest raw per-hand export files -> merge onto a uniform
1-second timeline -> windowed feature extraction -> MRMR feature ranking and
context filtering -> binary classification and evaluation.  A synthetic
paired-stream generator provides ground-truth datasets for end-to-end checks.
"""

__version__ = "0.1.0"
