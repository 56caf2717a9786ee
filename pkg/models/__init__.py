# Models package
