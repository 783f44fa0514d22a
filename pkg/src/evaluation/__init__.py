# Evaluation and experiments package
