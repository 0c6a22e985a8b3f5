from ragrec.ingest.cohort import (GROUPS, CohortError, EvalCohort,
                                  build_cohort, cohort_groups, write_cohort)
from ragrec.ingest.ratings import (Rating, RatingMatrix, RatingParseError,
                                   RatingValidationError, load_ratings)
from ragrec.ingest.split import (SplitDataset, SplitError, UserSplit,
                                 mask_count, split_dataset, split_user,
                                 write_split_manifest)
from ragrec.ingest.store import PreparedData, PreparedStore
