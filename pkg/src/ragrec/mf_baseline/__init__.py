from ragrec.mf_baseline.model import (MFError, MFModel, Recommendation,
                                      load_checkpoint, predict,
                                      recommend_top10, save_checkpoint)
from ragrec.mf_baseline.training import (MFConfig, MFDivergenceError,
                                         fit, gradients, grid_configs,
                                         grid_search, loss, rmse, train,
                                         write_grid_results)
