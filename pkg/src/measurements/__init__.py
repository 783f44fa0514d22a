# Measurement evaluation package
