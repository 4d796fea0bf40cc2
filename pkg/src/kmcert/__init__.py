"""Certified numerics for the Ising perceptron capacity threshold."""
