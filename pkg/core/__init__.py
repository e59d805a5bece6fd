"""Numerics: projective costates, contact flows, propagation and shooting."""
