"""Semi-supervised triage of acoustic bird-call detections.

Pipeline: decode and window audio -> log-mel spectrograms + detector filter
-> embeddings (flatten / trained autoencoder / external import) -> k-means
over the reference corpus -> expert cluster labels -> threshold-radius label
propagation to field windows -> recording verdicts and precision metrics.
"""

__version__ = "0.1.0"
