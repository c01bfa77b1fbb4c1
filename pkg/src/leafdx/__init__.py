"""Leaf disease classification from lesion colour and texture features."""
