"""
Group rewards and advantages
============================

Walk one decoded group through reward shaping, advantage standardization and
the clipped-ratio loss.
"""

import numpy as np

from sugkit.grpo import GrpoConfig, compute_advantages, grpo_loss, reward_vector

config = GrpoConfig(K=2, G=4)
scores = [-1.0, -2.0, -3.0, -4.0]
valid = [True, True, True, True]

# the truth is the second-best sequence
rewards, parts = reward_vector(scores, valid, [False, True, False, False], config)
print("rewards with the truth at rank 2:", np.round(rewards, 4))
print("  gap:", parts.gap, " rank:", np.round(parts.rank, 4), " hit:", parts.hit)

# no truth in the group: the miss penalty is applied, then valid sequences are floored at 1
rewards, parts = reward_vector(scores, valid, [False] * 4, config)
print("rewards without the truth:", rewards, "(before the floor:", parts.pre_floor, ")")

# an invalid sequence inside the top K lets one valid tail sequence climb to 1
rewards, parts = reward_vector(scores, [False, True, True, True], [False, True, False, False], config)
print("invalid leader:", np.round(rewards, 4), "cnt_bad =", parts.cnt_bad)

A, stats = compute_advantages(rewards, config.delta)
print("advantages:", np.round(A, 4), "sum =", A.sum())

policy = np.array([-1.0, -2.1, -2.9, -4.5])
print("loss at the reference:", grpo_loss(policy, policy, A, np.ones(4), config.eps))
print("loss after a step:", grpo_loss(policy + [0.3, 0.05, 0.0, -0.2], policy, A, np.ones(4), config.eps))
