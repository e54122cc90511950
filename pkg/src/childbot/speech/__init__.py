"""Grammar files, constrained recognition and recognition scoring."""
from .grammar import (GAMES, DuplicateSentence, EmptyGrammar, Grammar, ParseError, Recognition,
                      demo_grammar_path, distances, levenshtein_ids, load_grammar, parse_grammar,
                      recognize_constrained, tokenize, word_distance)
from .score import (LengthMismatch, Scores, align, evaluate_transcripts, read_transcripts,
                    score_recognition)

__all__ = [n for n in dir() if not n.startswith("_")]
