# rembed - randomized label embeddings for extreme multiclass/multilabel problems
# Library modules live under core/, the CLI in main.py
