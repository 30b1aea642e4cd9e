"""Parameter containers and the dense ReLU classifier."""
