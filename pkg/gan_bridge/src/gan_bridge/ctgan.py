"""Compact conditional tabular GAN (CTGAN-style training procedure).

Residual generator + packed critic trained with the WGAN gradient penalty,
a conditional vector over categorical columns with training-by-sampling, and
gumbel-softmax outputs for one-hot segments. Hyperparameters follow the
common defaults (embedding 128, two 256 hidden layers, pac 10, tau 0.2).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .transforms import TableTransformer

EMBEDDING_DIM = 128
HIDDEN_DIM = 256
PAC = 10
GP_WEIGHT = 10.0
TAU = 0.2


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


class Residual(nn.Module):
    def __init__(self, dim_in: int, dim_out: int):
        super().__init__()
        self.fc = nn.Linear(dim_in, dim_out)
        self.bn = nn.BatchNorm1d(dim_out)
        self.relu = nn.ReLU()

    def forward(self, x):
        out = self.relu(self.bn(self.fc(x)))
        return torch.cat([out, x], dim=1)


class Generator(nn.Module):
    def __init__(self, input_dim: int, data_dim: int):
        super().__init__()
        self.block1 = Residual(input_dim, HIDDEN_DIM)
        self.block2 = Residual(input_dim + HIDDEN_DIM, HIDDEN_DIM)
        self.head = nn.Linear(input_dim + 2 * HIDDEN_DIM, data_dim)

    def forward(self, x):
        return self.head(self.block2(self.block1(x)))


class Critic(nn.Module):
    def __init__(self, input_dim: int, pac: int):
        super().__init__()
        self.pac = pac
        self.net = nn.Sequential(
            nn.Linear(input_dim * pac, HIDDEN_DIM), nn.LeakyReLU(0.2), nn.Dropout(0.5),
            nn.Linear(HIDDEN_DIM, HIDDEN_DIM), nn.LeakyReLU(0.2), nn.Dropout(0.5),
            nn.Linear(HIDDEN_DIM, 1),
        )

    def forward(self, x):
        return self.net(x.reshape(-1, x.shape[1] * self.pac))


def apply_activations(raw: torch.Tensor, layout, hard: bool = False) -> torch.Tensor:
    segments = []
    cursor = 0
    for kind, width in layout:
        chunk = raw[:, cursor : cursor + width]
        if kind == "tanh":
            segments.append(torch.tanh(chunk))
        else:
            segments.append(nn.functional.gumbel_softmax(chunk, tau=TAU, hard=hard))
        cursor += width
    return torch.cat(segments, dim=1)


@dataclass
class ConditionSampler:
    """Training-by-sampling over categorical columns.

    Picks a column uniformly and a category by log-frequency, and serves real
    rows matching the picked category so rare categories are still learned.
    """

    spans: list
    cond_dim: int
    n_rows: int
    log_probs: list
    row_index: dict

    @classmethod
    def build(cls, transformer: TableTransformer, data: np.ndarray) -> "ConditionSampler":
        spans = transformer.categorical_spans()
        cond_dim = sum(info.span[1] - info.span[0] for info in spans)
        log_probs = []
        row_index = {}
        for info in spans:
            start, end = info.span
            counts = data[:, start:end].sum(axis=0)
            logf = np.log1p(counts)
            total = logf.sum()
            log_probs.append(logf / total if total > 0 else np.full(end - start, 1.0 / (end - start)))
            for k in range(end - start):
                row_index[(info.name, k)] = np.flatnonzero(data[:, start + k] == 1.0)
        return cls(spans, cond_dim, data.shape[0], log_probs, row_index)

    def sample(self, batch: int, rng: np.random.Generator):
        """(cond matrix, chosen (column, category) per sample, real row indices)."""
        if not self.spans:
            rows = rng.integers(self.n_rows, size=batch)
            return np.zeros((batch, 0)), [], rows
        cond = np.zeros((batch, self.cond_dim))
        chosen = []
        rows = np.zeros(batch, dtype=int)
        offsets = np.cumsum([0] + [i.span[1] - i.span[0] for i in self.spans])
        for b in range(batch):
            ci = int(rng.integers(len(self.spans)))
            probs = self.log_probs[ci]
            cat = int(rng.choice(len(probs), p=probs))
            cond[b, offsets[ci] + cat] = 1.0
            chosen.append((ci, cat))
            candidates = self.row_index[(self.spans[ci].name, cat)]
            if len(candidates) == 0:
                rows[b] = int(rng.integers(self.n_rows))
            else:
                rows[b] = int(rng.choice(candidates))
        return cond, chosen, rows

    def conditioning_loss(self, raw: torch.Tensor, chosen) -> torch.Tensor:
        """Cross-entropy tying the conditioned column's output to the condition,
        batched per column."""
        if not chosen:
            return torch.zeros(())
        by_column: dict[int, tuple[list, list]] = {}
        for b, (ci, cat) in enumerate(chosen):
            by_column.setdefault(ci, ([], []))
            by_column[ci][0].append(b)
            by_column[ci][1].append(cat)
        total = torch.zeros(())
        for ci, (rows, cats) in by_column.items():
            start, end = self.spans[ci].span
            logits = raw[rows, start:end]
            target = torch.tensor(cats)
            total = total + nn.functional.cross_entropy(logits, target, reduction="sum")
        return total / len(chosen)


def gradient_penalty(critic: Critic, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    pac = critic.pac
    groups = real.shape[0] // pac
    eps = torch.rand(groups, 1, 1).repeat(1, pac, real.shape[1]).reshape(real.shape)
    mix = (eps * real + (1 - eps) * fake).requires_grad_(True)
    score = critic(mix)
    grad = torch.autograd.grad(
        outputs=score, inputs=mix,
        grad_outputs=torch.ones_like(score),
        create_graph=True, retain_graph=True, only_inputs=True,
    )[0]
    norms = grad.reshape(groups, -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean() * GP_WEIGHT


class BridgeGAN:
    """fit/sample around the conditional WGAN-GP loop."""

    def __init__(self, use_copula: bool, epochs: int = 300, batch_size: int = 500):
        self.use_copula = use_copula
        self.epochs = max(1, int(epochs))
        self.batch_size = max(PAC, int(batch_size) // PAC * PAC)
        self.transformer: TableTransformer | None = None
        self.generator: Generator | None = None
        self.cond: ConditionSampler | None = None

    def fit(self, schema, numeric, categorical, seed: int) -> None:
        seed_everything(seed)
        self.transformer = TableTransformer(self.use_copula)
        data = self.transformer.fit_transform(schema, numeric, categorical, seed)
        n = data.shape[0]
        batch = min(self.batch_size, max(PAC, n // PAC * PAC))
        layout = self.transformer.activation_layout()
        self.cond = ConditionSampler.build(self.transformer, data)

        gen = Generator(EMBEDDING_DIM + self.cond.cond_dim, self.transformer.output_dim)
        critic = Critic(self.transformer.output_dim + self.cond.cond_dim, PAC)
        opt_g = torch.optim.Adam(gen.parameters(), lr=2e-4, betas=(0.5, 0.9), weight_decay=1e-6)
        opt_c = torch.optim.Adam(critic.parameters(), lr=2e-4, betas=(0.5, 0.9))
        rng = np.random.default_rng(seed)
        tensor_data = torch.from_numpy(data.astype(np.float32))

        steps = max(1, n // batch)
        for _ in range(self.epochs):
            for _ in range(steps):
                # critic step
                cond_np, chosen, row_idx = self.cond.sample(batch, rng)
                cond = torch.from_numpy(cond_np.astype(np.float32))
                real = tensor_data[row_idx]
                z = torch.randn(batch, EMBEDDING_DIM)
                with torch.no_grad():
                    fake = apply_activations(gen(torch.cat([z, cond], dim=1)), layout)
                real_in = torch.cat([real, cond], dim=1)
                fake_in = torch.cat([fake, cond], dim=1)
                loss_c = critic(fake_in).mean() - critic(real_in).mean()
                loss_c = loss_c + gradient_penalty(critic, real_in, fake_in)
                opt_c.zero_grad()
                loss_c.backward()
                opt_c.step()

                # generator step
                cond_np, chosen, _ = self.cond.sample(batch, rng)
                cond = torch.from_numpy(cond_np.astype(np.float32))
                z = torch.randn(batch, EMBEDDING_DIM)
                raw = gen(torch.cat([z, cond], dim=1))
                fake = apply_activations(raw, layout)
                loss_g = -critic(torch.cat([fake, cond], dim=1)).mean()
                loss_g = loss_g + self.cond.conditioning_loss(raw, chosen)
                opt_g.zero_grad()
                loss_g.backward()
                opt_g.step()

        gen.eval()
        self.generator = gen

    def sample(self, n: int, seed: int) -> dict:
        seed_everything(seed)
        rng = np.random.default_rng(seed)
        layout = self.transformer.activation_layout()
        chunks = []
        remaining = n
        with torch.no_grad():
            while remaining > 0:
                batch = min(512, remaining)
                cond_np, _, _ = self.cond.sample(batch, rng)
                z = torch.randn(batch, EMBEDDING_DIM)
                cond = torch.from_numpy(cond_np.astype(np.float32))
                fake = apply_activations(self.generator(torch.cat([z, cond], dim=1)),
                                         layout, hard=True)
                chunks.append(fake.numpy())
                remaining -= batch
        data = np.vstack(chunks)[:n]
        return self.transformer.inverse(data)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        torch.save(
            {
                "use_copula": self.use_copula,
                "epochs": self.epochs,
                "batch_size": self.batch_size,
                "transformer": self.transformer,
                "cond": self.cond,
                "generator_state": self.generator.state_dict(),
                "generator_dims": (
                    EMBEDDING_DIM + self.cond.cond_dim,
                    self.transformer.output_dim,
                ),
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "BridgeGAN":
        blob = torch.load(path, weights_only=False)
        model = cls(blob["use_copula"], blob["epochs"], blob["batch_size"])
        model.transformer = blob["transformer"]
        model.cond = blob["cond"]
        gen = Generator(*blob["generator_dims"])
        gen.load_state_dict(blob["generator_state"])
        gen.eval()
        model.generator = gen
        return model
