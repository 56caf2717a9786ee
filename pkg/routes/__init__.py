# Routes package
