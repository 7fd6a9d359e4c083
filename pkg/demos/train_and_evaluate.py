"""
SFT seed, GRPO fine-tuning, offline metrics
===========================================

Seed a policy with supervised training, fine-tune it with beam-search-driven
GRPO, and score both on held-out prefixes. Takes a few seconds.
"""

from sugkit.context import prompt_tokens
from sugkit.decoder import QabsParams
from sugkit.evaluator import EvalInstance, evaluate
from sugkit.grpo import GrpoConfig, train_grpo
from sugkit.scorer import ScorerModel, generation_mask, sft_train
from sugkit.synthetic import make_task

task = make_task(seed=2, n_train=2000, n_test=200, scale=8.0)
vocab = task.vocab
pairs = []
for ctx, truth, _ in task.train:
    body, _ = vocab.encode(truth[len(ctx.prefix):])
    pairs.append((prompt_tokens(ctx, vocab), body + [vocab.eos_id]))
seed_model, _ = sft_train(ScorerModel(vocab, order=2, active=generation_mask(vocab)), pairs, epochs=1, lr=0.5)

config = GrpoConfig(T=10, lr=2.0, ref_sync_every=1)
policy, steps = train_grpo(seed_model, task.train, config, epochs=1, batch_size=8, seed=2)
for r in steps[::50]:
    # the loss is read before the update, where the ratio is 1 and mean(A) = 0, so it prints as zero
    print(f"step {r.step:3d} reward {r.mean_reward:+.3f} "
          f"hit {r.group_hit_rate:.2f} clipped {r.clip_fraction:.2f}")

test = [EvalInstance(ctx, truth, True, converted) for ctx, truth, converted in task.test]
params = QabsParams(T=10)
for name, model in (("sft seed", seed_model), ("grpo", policy)):
    rep = evaluate(model, None, test, params)
    order = rep.slices["order"]
    print(f"{name:9s} HR@12 {rep.hr_at_k:.3f}  MRR {rep.mrr:.3f}  DIV {rep.div:.3f}  QUA {rep.qua:.3f}"
          f"  order-slice MRR {order['mrr'] if order else float('nan'):.3f}")
