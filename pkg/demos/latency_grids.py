"""
Cost and quality grids
======================

Sweep beam width and vocabulary pruning on a small model and print the
plot-ready CSV rows. Model-call counts are exact; wall-clock is indicative.
"""

from sugkit.bench import run_bench
from sugkit.context import prompt_tokens
from sugkit.decoder import QabsParams
from sugkit.evaluator import EvalInstance
from sugkit.scorer import ScorerModel, generation_mask, sft_train, token_frequencies
from sugkit.synthetic import make_task

task = make_task(seed=3, n_train=500, n_test=60)
vocab = task.vocab
pairs = []
for ctx, truth, _ in task.train:
    body, _ = vocab.encode(truth[len(ctx.prefix):])
    pairs.append((prompt_tokens(ctx, vocab), body + [vocab.eos_id]))
model, _ = sft_train(ScorerModel(vocab, order=2, active=generation_mask(vocab)), pairs, epochs=2, lr=0.5)
test = [EvalInstance(ctx, truth) for ctx, truth, _ in task.test]
params = QabsParams(T=10)

print(run_bench("qabs_vs_vanilla", model, test, params).to_csv())
print(run_bench("beam_width_grid", model, test, params).to_csv())

freqs = token_frequencies(vocab.encode(truth)[0] for _, truth, _ in task.train)
print(run_bench("prune_grid", model, test, params, grid=[len(vocab), 20, 16], frequencies=freqs).to_csv())
