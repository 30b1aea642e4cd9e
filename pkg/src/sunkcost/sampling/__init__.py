"""Learning-speed recording and batch samplers."""
