"""
Command-line harness for NN-LIFT experiments.
"""
