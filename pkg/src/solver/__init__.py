# Optimization package
