import os
from dotenv import load_dotenv

load_dotenv()

# diagnostics only; pipeline parameters come from CLI flags
LOG_LEVEL = os.getenv("EDGEPED_LOG_LEVEL", "INFO").upper()

DEFAULT_SEED = 42
DEFAULT_GRID = (0, 10, 20, 30, 33, 35, 37, 40, 50, 51)
NMS_IOU = 0.6
MATCH_IOU = 0.5
DEFAULT_FLOOR_DB = 43.0
BSM_FPS = 10
MAX_CRF = 51
BLOCK = 8
