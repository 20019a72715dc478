"""Conversational product-recommendation agent trained from unlabeled,
order-terminated conversations."""

__version__ = "0.1.0"
