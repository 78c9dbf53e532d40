# Graph model, graph files and the built-in catalog
