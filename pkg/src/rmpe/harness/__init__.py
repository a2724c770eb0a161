"""Experiment harness: datasets, traces, experiments and CLI plumbing."""
