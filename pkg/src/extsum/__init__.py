"""Extractive summarization with chat LLMs: ORACLE labels, prompts, pipelines and analysis."""

__version__ = "0.1.0"
