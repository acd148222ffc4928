"""Pipelines combining the fkcheb building blocks."""
