# Shape space package
