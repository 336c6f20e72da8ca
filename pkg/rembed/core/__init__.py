# Matrix kernels, solvers, embeddings, downstream models and file formats
