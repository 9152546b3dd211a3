# 二分查找常量
BISECTION_MAX_ITER = 200
BISECTION_XTOL = 1e-12
FIXED_POINT_TOL = 1e-12         # |f(α*) − α*| 的校验阈值

# 权衡曲线常量
CONVEXITY_TOL = 1e-10
CONVEXITY_CHECK_POINTS = 1025
EPS_SEARCH_MAX = 700.0          # e^700 接近 double 上限
EPS_SUP_TOL = 1e-15             # sup_x(1−δ−e^a x − f(x)) ≤ 该值即视为满足
EPS_GRID_POINTS = 2 ** 14
QUANTILE_GRID_SPAN = 12.0       # 正态分位数网格跨度 ±12

# 基础分布对常量
MIN_GRID_SIZE = 2 ** 10
BREAKPOINT_JUMP = 1e-3          # ĝ 跳变超过该值时作为额外求积节点
NORMALIZATION_TOL = 1e-6

# 次序统计量常量
BETA_TAIL_TOL = 1e-13
WINDOW_WIDEN_SIGMAS = 6.0
MAX_NODE_DOUBLINGS = 3
VK_CHUNK_SIZE = 512
VK_BATCH_NODES = 2 ** 18       # 一次向量化求积的节点总数上限（行数 × 每行节点数）

# 尾概率常量
LAMBDA_MIN = -700.0

# 机制模拟常量
SIM_BLOCK_SIZE = 2 ** 16
TRANSCRIPT_VERSION = 1
BIT_GENERATOR = "Philox4x64"

# 随机数流用途编号
STREAM_BITS = 1
STREAM_NOISE = 2
STREAM_SUBSAMPLE = 3

# CLI 退出码
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA_INVARIANT = 2
EXIT_NUMERICAL = 3

# CSV 表头
SWEEP_CSV_HEADER = [
    "family", "param", "n", "r", "seed", "u", "accuracy",
    "p_value", "eps_lower", "eps_upper", "runtime_ms", "error",
]
VK_CSV_HEADER = ["k", "v_k", "quad_error"]
BASEPAIR_CSV_HEADER = ["y", "q_density", "score", "rank_cdf"]
