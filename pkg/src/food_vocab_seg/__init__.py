"""Open-vocabulary food segmentation with image-informed text embeddings."""

__version__ = "0.1.0"
