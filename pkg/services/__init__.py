# Datasets, training, unlearning methods, metrics and experiment pipeline
