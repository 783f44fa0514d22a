# Synthetic data package
