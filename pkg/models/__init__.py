# Data containers, classifier and checkpoint format
