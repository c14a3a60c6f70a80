"""birrnet: Ethiopian birr banknote recognition toolkit.

A from-scratch depthwise-separable CNN engine (forward and backward), a
transfer-learning trainer with per-layer freezing, an augmentation and
evaluation pipeline, and a CLI plus HTTP classification service.
"""

__version__ = "0.1.0"
