from src.analysis.aggregate import aggregate_runs, correlation_table, format_cell, results_table, write_table
from src.analysis.representation_analysis import correlation_gap, flatness_curve, logits_from, write_curve
