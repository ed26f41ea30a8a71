from .core import ModifiedRelativeError, StandardMetrics, modified_relative_error, standard_metrics, velocity_magnitude
from .evaluate import (MetricReport, MetricRow, comparison_table, evaluate_fields, evaluate_model, predict_field,
                       sweep)
