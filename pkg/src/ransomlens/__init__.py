"""Crypto-ransomware detection from file-I/O event logs.

Submodules: ``eventlog`` (log format, entropy, decoys), ``augment``
(bootstrapping and keyed augmentation), ``features`` (symbol encoding and
N-grams), ``models`` (linear SVM and LSTM), ``attribution`` (Integrated
Gradients), ``redteam`` (simulator and adversarial loop), ``detector``
(streaming sliding-window detection), and ``experiments`` (pipeline).
"""

__version__ = "0.1.0"
