"""Granger causality between selected channels of a high-dimensional network."""
