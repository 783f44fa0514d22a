# Mesh representation package
