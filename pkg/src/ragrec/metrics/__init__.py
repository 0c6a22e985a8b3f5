from ragrec.metrics.aggregate import (DEFAULT_GROUP_BY, HIT_FLAT_COLUMNS,
                                      METHODS, OUTCOMES, RESULT_COLUMNS,
                                      TRIAL_COLUMNS, CdfSeries, EvalRecord,
                                      SchemaError, aggregate, canonical_sort,
                                      cdf, read_header, read_hit_flat,
                                      read_results, write_aggregate,
                                      write_cdf, write_results)
from ragrec.metrics.scoring import (HIT_METRICS, MetricError, hit_any,
                                    hit_at_10, hit_flat_at_10, hit_score,
                                    ndcg_at_10)
