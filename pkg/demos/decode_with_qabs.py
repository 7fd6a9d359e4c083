"""
Quality-aware beam search
=========================

Train a small scorer on a synthetic task, then compare plain beam search with
the gated decoder: same suggestions near the top, far fewer model calls.
"""

import numpy as np

from sugkit.context import prompt_tokens
from sugkit.decoder import QabsParams, beam_search, qa_beam_search
from sugkit.scorer import ScorerModel, generation_mask, sft_train
from sugkit.synthetic import make_task

task = make_task(seed=1, n_train=600, n_test=50)
vocab = task.vocab
pairs = []
for ctx, truth, _ in task.train:
    body, _ = vocab.encode(truth[len(ctx.prefix):])
    pairs.append((prompt_tokens(ctx, vocab), body + [vocab.eos_id]))
model, losses = sft_train(ScorerModel(vocab, order=2, active=generation_mask(vocab)), pairs, epochs=2, lr=0.5)
print("SFT loss per epoch:", np.round(losses, 3))

ctx, truth, _ = task.test[0]
prompt = prompt_tokens(ctx, vocab)
params = QabsParams()  # tau -15, alpha 1.8, R_min 4, K_win 15, K = K_search = 12

plain = beam_search(model, prompt, params.K_search, params.T)
gated = qa_beam_search(model, prompt, params)
print(f"prefix {ctx.prefix!r}, truth {truth!r}")
for name, res in (("beam", plain), ("qa-bs", gated)):
    top = res.entries(vocab, lead=ctx.prefix)[:5]
    print(f"{name:6s} calls={res.stats.model_calls:4d} exit={res.stats.exit_reason:10s}", [q for q, _ in top])

# the gated decoder never costs more, on any input
calls = [
    (qa_beam_search(model, prompt_tokens(c, vocab), params).stats.model_calls,
     beam_search(model, prompt_tokens(c, vocab), 12, 15).stats.model_calls)
    for c, _, _ in task.test
]
print("never more calls:", all(q <= v for q, v in calls))
print(f"mean savings: {np.mean([1 - q / v for q, v in calls]):.1%}")
