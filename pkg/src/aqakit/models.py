"""Model builders (audio-only FCN, FiLM, MALiMo), training, and saliency.

Feature matrices enter as (batch, 1, mel=64, time) tensors.  The stem's
first convolution is 3x12 with stride 1x9: 3 taps across frequency, 12
across time with a stride of 9 that collapses the long time axis early.
Variable-length clips are bucketed into same-length bins per batch and
zero-padded on the right; per-sample valid widths are carried through the
stem so pooled means never include padding.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .neural import ops
from .neural.optim import AdamState, Hyperparams, adam_step
from .neural.tensor import Tensor, no_grad

PAD, UNK = "<pad>", "<unk>"
N_CLASSES = 36
FILM_CHANNELS = 128
HEAD_CONV = 512
HEAD_HIDDEN = 1024
AUDIO_POOL = 8  # mean-pool window/stride feeding the audio controller


class TrainingError(Exception):
    pass


@dataclass
class ModelConfig:
    kind: str  # "fcn" | "film" | "malimo"
    vocab_size: int = 0
    modulated_units: int = 2
    stem_base_filters: int = 32
    controller_hidden: int = 512
    embed_dim: int = 256
    classes: int = N_CLASSES
    scale: int = 1
    modulation_order: str = "question_first"  # or "audio_first"

    def __post_init__(self):
        if self.kind not in ("fcn", "film", "malimo"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "film" and not (1 <= self.modulated_units <= 12):
            raise ValueError("film takes 1..12 modulated layers")
        if self.kind == "malimo" and not (1 <= self.modulated_units <= 6):
            raise ValueError("malimo takes 1..6 blocks")

    @property
    def stem_blocks(self) -> int:
        return 5 if self.kind == "fcn" else 3

    def dim(self, full: int) -> int:
        return max(1, full // self.scale)


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape).astype(dtype)


class ConvLayer:
    def __init__(self, rng, cin, cout, kernel, stride, padding, dtype,
                 batchnorm: bool = True, bn_affine: bool = True,
                 bias: bool = True):
        kh, kw = kernel
        self.w = Tensor(_uniform(rng, (cout, cin, kh, kw), cin * kh * kw, dtype),
                        requires_grad=True)
        # a channel constant is removed by batch normalization, so convs
        # feeding a BN carry no bias
        self.b = None if (batchnorm or not bias) else \
            Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.padding = padding
        self.bn = ops.BatchNorm2d(cout, affine=bn_affine, dtype=dtype) \
            if batchnorm else None

    def __call__(self, x, training, activate=True):
        out = ops.conv2d(x, self.w, self.b, self.stride, self.padding)
        if self.bn is not None:
            out = self.bn(out, training)
        return ops.relu(out) if activate else out

    def parameters(self):
        ps = [self.w] if self.b is None else [self.w, self.b]
        if self.bn is not None:
            ps.extend(self.bn.parameters())
        return ps


def _stem_layers(rng, config: ModelConfig, dtype):
    layers = []
    cin = 1
    filters = config.dim(config.stem_base_filters)
    for block in range(config.stem_blocks):
        if block == 0:
            layers.append(ConvLayer(rng, cin, filters, (3, 12), (1, 9), (1, 0), dtype))
        else:
            layers.append(ConvLayer(rng, cin, filters, (3, 3), (1, 1), (1, 1), dtype))
        layers.append(ConvLayer(rng, filters, filters, (3, 3), (1, 1), (1, 1), dtype))
        cin = filters
        filters *= 2
    return layers, cin  # cin = stem output channels


def stem_output_width(w: int) -> int:
    """Valid (unpadded) width after the stem's first conv; pools halve it."""
    return (w - 12) // 9 + 1


def _stem_forward(layers, x, training):
    for i in range(0, len(layers), 2):
        x = layers[i](x, training)
        x = layers[i + 1](x, training)
        x = ops.maxpool2d(x)
    return x


def _stem_valid_widths(widths: np.ndarray, blocks: int) -> np.ndarray:
    w = np.maximum((widths - 12) // 9 + 1, 1)
    for _ in range(blocks):
        w = np.maximum(w // 2, 1)
    return w


class FilmLayer:
    """Residual block: conv+ReLU, conv, BN (no affine), modulation, ReLU,
    with a skip from the first ReLU to the block output.  Two coordinate
    maps ride along with the input."""

    def __init__(self, rng, channels, dtype):
        self.conv1 = ConvLayer(rng, channels + 2, channels, (3, 3), (1, 1), (1, 1),
                               dtype, batchnorm=False)
        self.conv2 = ConvLayer(rng, channels, channels, (3, 3), (1, 1), (1, 1),
                               dtype, batchnorm=False, bias=False)
        self.bn = ops.BatchNorm2d(channels, affine=False, dtype=dtype)

    def __call__(self, x, gamma, beta, training, bypass):
        n, _, h, w = x.data.shape
        coords = ops.coord_maps(h, w, x.data.dtype)
        coords_t = Tensor(np.broadcast_to(coords, (n, 2, h, w)))
        inp = ops.concat([x, coords_t], axis=1)
        a = self.conv1(inp, training)
        z = self.conv2(a, training, activate=False)
        z = self.bn(z, training)
        if not bypass:
            z = ops.film(z, gamma, beta)
        return ops.add(ops.relu(z), a)

    def parameters(self):
        return self.conv1.parameters() + self.conv2.parameters()


@dataclass
class Batch:
    feats: np.ndarray        # (N, 1, 64, Tmax) float32
    widths: np.ndarray       # (N,) valid frame counts
    tokens: np.ndarray       # (N, L) int64, 0 = <pad>
    tok_lens: np.ndarray     # (N,)
    labels: np.ndarray       # (N,) int64


class AudioQAModel:
    """Shared machinery for the three architectures."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.stem, stem_ch = _stem_layers(rng, config, dtype)
        self.stem_channels = stem_ch
        c = config
        if c.kind == "fcn":
            self.head = [
                ConvLayer(rng, stem_ch, c.dim(512), (3, 3), (1, 1), (1, 1), dtype),
                ConvLayer(rng, c.dim(512), c.dim(1024), (1, 1), (1, 1), (0, 0), dtype),
                ConvLayer(rng, c.dim(1024), c.classes, (1, 1), (1, 1), (0, 0), dtype,
                          batchnorm=False),
            ]
        else:
            ch = c.dim(FILM_CHANNELS)
            self.film_layers = [FilmLayer(rng, ch, dtype)
                                for _ in range(self.n_film_layers)]
            self.embed = Tensor(
                rng.uniform(-0.1, 0.1, (c.vocab_size, c.dim(c.embed_dim)))
                .astype(dtype), requires_grad=True)
            hidden = c.dim(c.controller_hidden)
            self.q_lstm = ops.LSTM(c.dim(c.embed_dim), hidden, 2, rng, dtype)
            n_mod1 = self.n_film_layers if c.kind == "film" else c.modulated_units
            self.q_proj_w = Tensor(_uniform(rng, (2 * ch * n_mod1, hidden), hidden, dtype),
                                   requires_grad=True)
            self.q_proj_b = Tensor(np.zeros(2 * ch * n_mod1, dtype=dtype),
                                   requires_grad=True)
            if c.kind == "malimo":
                self.a_lstm = ops.LSTM(stem_ch, hidden, 2, rng, dtype)
                self.a_proj_w = Tensor(
                    _uniform(rng, (2 * ch * c.modulated_units, hidden), hidden, dtype),
                    requires_grad=True)
                self.a_proj_b = Tensor(np.zeros(2 * ch * c.modulated_units, dtype=dtype),
                                       requires_grad=True)
            self.head_conv = ConvLayer(rng, ch, c.dim(HEAD_CONV), (1, 1), (1, 1),
                                       (0, 0), dtype, batchnorm=False)
            self.fc1_w = Tensor(_uniform(rng, (c.dim(HEAD_HIDDEN), c.dim(HEAD_CONV)),
                                         c.dim(HEAD_CONV), dtype), requires_grad=True)
            self.fc1_b = Tensor(np.zeros(c.dim(HEAD_HIDDEN), dtype=dtype),
                                requires_grad=True)
            self.fc2_w = Tensor(_uniform(rng, (c.classes, c.dim(HEAD_HIDDEN)),
                                         c.dim(HEAD_HIDDEN), dtype), requires_grad=True)
            self.fc2_b = Tensor(np.zeros(c.classes, dtype=dtype), requires_grad=True)

    @property
    def n_film_layers(self) -> int:
        if self.config.kind == "film":
            return self.config.modulated_units
        return 2 * self.config.modulated_units  # two stacked layers per block

    # ----------------------------------------------------- parameters

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = []

        def grab(prefix, obj):
            if isinstance(obj, Tensor):
                named.append((prefix, obj))
            elif isinstance(obj, ConvLayer):
                named.append((f"{prefix}.w", obj.w))
                if obj.b is not None:
                    named.append((f"{prefix}.b", obj.b))
                if obj.bn is not None and obj.bn.affine:
                    named.append((f"{prefix}.bn.gamma", obj.bn.gamma))
                    named.append((f"{prefix}.bn.beta", obj.bn.beta))
            elif isinstance(obj, FilmLayer):
                grab(f"{prefix}.conv1", obj.conv1)
                grab(f"{prefix}.conv2", obj.conv2)
            elif isinstance(obj, ops.LSTM):
                for li, p in enumerate(obj.params):
                    for key, t in p.items():
                        named.append((f"{prefix}.l{li}.{key}", t))

        for i, layer in enumerate(self.stem):
            grab(f"stem.{i}", layer)
        if self.config.kind == "fcn":
            for i, layer in enumerate(self.head):
                grab(f"head.{i}", layer)
        else:
            for i, layer in enumerate(self.film_layers):
                grab(f"film.{i}", layer)
            grab("embed", self.embed)
            grab("q_lstm", self.q_lstm)
            grab("q_proj.w", self.q_proj_w)
            grab("q_proj.b", self.q_proj_b)
            if self.config.kind == "malimo":
                grab("a_lstm", self.a_lstm)
                grab("a_proj.w", self.a_proj_w)
                grab("a_proj.b", self.a_proj_b)
            grab("head_conv", self.head_conv)
            grab("fc1.w", self.fc1_w)
            grab("fc1.b", self.fc1_b)
            grab("fc2.w", self.fc2_w)
            grab("fc2.b", self.fc2_b)
        return named

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def batchnorms(self) -> list[tuple[str, ops.BatchNorm2d]]:
        out = []
        for i, layer in enumerate(self.stem):
            if layer.bn is not None:
                out.append((f"stem.{i}.bn", layer.bn))
        if self.config.kind == "fcn":
            for i, layer in enumerate(self.head):
                if layer.bn is not None:
                    out.append((f"head.{i}.bn", layer.bn))
        else:
            for i, layer in enumerate(self.film_layers):
                out.append((f"film.{i}.bn", layer.bn))
        return out

    def count_parameters(self) -> int:
        return sum(t.data.size for t in self.parameters())

    # ----------------------------------------------------- controllers

    def _question_state(self, tokens: np.ndarray, tok_lens: np.ndarray) -> Tensor:
        n, length = tokens.shape
        emb = ops.embedding(self.embed, tokens)  # (N, L, D)
        steps = [ops.reshape(ops.slice_axis(emb, 1, t, t + 1),
                             (n, emb.data.shape[2])) for t in range(length)]
        masks = [(t < tok_lens).astype(self.dtype).reshape(n, 1)
                 for t in range(length)]
        return self.q_lstm(steps, masks)

    def _audio_state(self, stem_out: Tensor, stem_widths: np.ndarray) -> Tensor:
        n, c, h, w = stem_out.data.shape
        if h >= AUDIO_POOL and w >= AUDIO_POOL:
            pooled = ops.avgpool2d(stem_out, (AUDIO_POOL, AUDIO_POOL))
            wp = pooled.data.shape[3]
            valid = np.clip(stem_widths // AUDIO_POOL, 1, wp)
        else:
            # stem output narrower than one pooling window: one global step
            pooled = ops.reshape(ops.global_avg_pool(stem_out), (n, c, 1, 1))
            wp = 1
            valid = np.ones(n, dtype=np.int64)
        hp = pooled.data.shape[2]
        steps = [ops.reshape(ops.slice_axis(pooled, 3, t, t + 1), (n, c * hp))
                 for t in range(wp)]
        masks = [(t < valid).astype(self.dtype).reshape(n, 1) for t in range(wp)]
        return self.a_lstm(steps, masks)

    def _modulation(self, state: Tensor, proj_w: Tensor, proj_b: Tensor,
                    n_layers: int):
        """Slice a controller projection into per-layer (gamma, beta) pairs."""
        ch = self.config.dim(FILM_CHANNELS)
        gb = ops.linear(state, proj_w, proj_b)
        pairs = []
        for layer in range(n_layers):
            base = 2 * ch * layer
            gamma = ops.slice_axis(gb, 1, base, base + ch)
            beta = ops.slice_axis(gb, 1, base + ch, base + 2 * ch)
            pairs.append((gamma, beta))
        return pairs

    # ----------------------------------------------------- forward

    def forward(self, batch: Batch, training: bool = False,
                bypass_modulation: bool = False,
                modulation_override=None, taps: dict | None = None) -> Tensor:
        x = Tensor(np.ascontiguousarray(batch.feats, dtype=self.dtype))
        stem_out = _stem_forward(self.stem, x, training)
        stem_widths = _stem_valid_widths(batch.widths, self.config.stem_blocks)
        wmask = _width_mask(stem_widths, stem_out.data.shape[3])

        if self.config.kind == "fcn":
            h = stem_out
            h = self.head[0](h, training)
            h = self.head[1](h, training)
            h = self.head[2](h, training, activate=False)
            if taps is not None:
                taps["head"] = h
            return ops.global_avg_pool(h, wmask)

        n = batch.feats.shape[0]
        ch = self.config.dim(FILM_CHANNELS)
        if bypass_modulation:
            identity = (Tensor(np.ones((n, ch), dtype=self.dtype)),
                        Tensor(np.zeros((n, ch), dtype=self.dtype)))
            layer_mods = [identity] * self.n_film_layers
        elif modulation_override is not None:
            layer_mods = modulation_override
        else:
            q_state = self._question_state(batch.tokens, batch.tok_lens)
            if self.config.kind == "film":
                layer_mods = self._modulation(q_state, self.q_proj_w, self.q_proj_b,
                                              self.n_film_layers)
            else:
                a_state = self._audio_state(stem_out, stem_widths)
                q_mods = self._modulation(q_state, self.q_proj_w, self.q_proj_b,
                                          self.config.modulated_units)
                a_mods = self._modulation(a_state, self.a_proj_w, self.a_proj_b,
                                          self.config.modulated_units)
                layer_mods = []
                for qm, am in zip(q_mods, a_mods):
                    if self.config.modulation_order == "question_first":
                        layer_mods.extend([qm, am])
                    else:
                        layer_mods.extend([am, qm])

        h = stem_out
        for layer, (gamma, beta) in zip(self.film_layers, layer_mods):
            h = layer(h, gamma, beta, training, bypass_modulation)
        if taps is not None:
            taps["modulated"] = h
        h = self.head_conv(h, training)
        if taps is not None:
            taps["head"] = h
        pooled = ops.global_avg_pool(h, wmask)
        hid = ops.relu(ops.linear(pooled, self.fc1_w, self.fc1_b))
        return ops.linear(hid, self.fc2_w, self.fc2_b)


def _width_mask(valid_widths: np.ndarray, total: int) -> np.ndarray:
    return (np.arange(total)[None, :] < valid_widths[:, None])


def build_model(config: ModelConfig, seed: int = 0, dtype=np.float32) -> AudioQAModel:
    if config.kind != "fcn" and config.vocab_size < 2:
        raise ValueError("modulated models need vocab_size >= 2")
    return AudioQAModel(config, seed=seed, dtype=dtype)


# ---------------------------------------------------------------------------
# Vocabulary and batching
# ---------------------------------------------------------------------------

def build_vocab(token_lists) -> dict[str, int]:
    """Training-split word index; 0 and 1 are reserved for pad/unknown."""
    words = sorted({w for tokens in token_lists for w in tokens})
    vocab = {PAD: 0, UNK: 1}
    for w in words:
        vocab[w] = len(vocab)
    return vocab


def encode_tokens(tokens, vocab: dict[str, int]) -> list[int]:
    unk = vocab[UNK]
    return [vocab.get(w, unk) for w in tokens]


@dataclass
class Example:
    clip_id: str
    question_id: str
    feat: np.ndarray          # (T, 64) normalized
    tokens: list[int]
    label: int
    skill: str = ""
    template_id: str = ""


def collate(examples: list[Example]) -> Batch:
    n = len(examples)
    t_max = max(e.feat.shape[0] for e in examples)
    l_max = max(len(e.tokens) for e in examples)
    feats = np.zeros((n, 1, examples[0].feat.shape[1], t_max), dtype=np.float32)
    tokens = np.zeros((n, l_max), dtype=np.int64)
    widths = np.zeros(n, dtype=np.int64)
    tok_lens = np.zeros(n, dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)
    for i, e in enumerate(examples):
        t = e.feat.shape[0]
        feats[i, 0, :, :t] = e.feat.T  # (mel, time) layout
        widths[i] = t
        tokens[i, :len(e.tokens)] = e.tokens
        tok_lens[i] = len(e.tokens)
        labels[i] = e.label
    return Batch(feats, widths, tokens, tok_lens, labels)


def make_batches(examples: list[Example], batch_size: int,
                 rng: np.random.Generator | None = None,
                 bin_width: int = 200) -> list[list[Example]]:
    """Same-length-bin bucketing; batches never mix bins, so right-padding
    inside a batch stays small."""
    bins: dict[int, list[int]] = {}
    for i, e in enumerate(examples):
        bins.setdefault(e.feat.shape[0] // bin_width, []).append(i)
    batches = []
    for key in sorted(bins):
        idxs = bins[key]
        if rng is not None:
            idxs = [idxs[j] for j in rng.permutation(len(idxs))]
        start = len(batches)
        for lo in range(0, len(idxs), batch_size):
            batches.append([examples[i] for i in idxs[lo:lo + batch_size]])
        # a singleton remainder cannot feed train-mode batchnorm; fold it
        # into the previous batch from the same bin when one exists
        if len(batches) - start >= 2 and len(batches[-1]) == 1:
            batches[-2].extend(batches.pop())
    if rng is not None:
        batches = [batches[j] for j in rng.permutation(len(batches))]
    return batches


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def predict(model: AudioQAModel, examples: list[Example],
            batch_size: int = 40) -> np.ndarray:
    preds = []
    with no_grad():
        for chunk in make_batches(examples, batch_size):
            logits = model.forward(collate(chunk), training=False)
            for e, p in zip(chunk, logits.data.argmax(axis=1)):
                preds.append((e.question_id, int(p)))
    order = {e.question_id: i for i, e in enumerate(examples)}
    out = np.zeros(len(examples), dtype=np.int64)
    for qid, p in preds:
        out[order[qid]] = p
    return out


def accuracy(model: AudioQAModel, examples: list[Example],
             batch_size: int = 40) -> float:
    preds = predict(model, examples, batch_size)
    gold = np.array([e.label for e in examples])
    return float((preds == gold).mean())


def _model_state(model: AudioQAModel) -> list[np.ndarray]:
    arrays = [p.data.copy() for p in model.parameters()]
    for _, bn in model.batchnorms():
        arrays.append(bn.running_mean.copy())
        arrays.append(bn.running_var.copy())
    return arrays


def _restore_state(model: AudioQAModel, arrays: list[np.ndarray]) -> None:
    it = iter(arrays)
    for p in model.parameters():
        p.data[...] = next(it)
    for _, bn in model.batchnorms():
        bn.running_mean = next(it).copy()
        bn.running_var = next(it).copy()


def train_model(model: AudioQAModel, train_examples: list[Example],
                val_examples: list[Example], hyper: Hyperparams, seed: int = 0,
                early_stop_train_acc: float | None = None,
                early_stop_val_acc: float | None = None,
                log_path: str | Path | None = None) -> dict:
    """Minibatch training with Adam; retains the best-on-validation weights
    (parameters and batchnorm running statistics together).

    Returns {"log": per-epoch dicts, "best_val_acc": float}.  The model is
    left holding the best-validation state.
    """
    params = model.parameters()
    state = AdamState()
    rng = np.random.default_rng(seed)
    log = []
    best_val = -1.0
    best_snapshot = None
    log_fh = open(log_path, "w") if log_path is not None else None
    try:
        for epoch in range(hyper.epochs):
            losses = []
            hits = 0
            skipped = 0
            for chunk in make_batches(train_examples, hyper.batch_size, rng):
                if len(chunk) < 2:
                    skipped += len(chunk)  # lone clip in its length bin
                    continue
                batch = collate(chunk)
                for p in params:
                    p.zero_grad()
                logits = model.forward(batch, training=True)
                loss = ops.softmax_cross_entropy(logits, batch.labels)
                if not np.isfinite(loss.data):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {len(losses)}")
                loss.backward()
                adam_step(params, state, hyper)
                losses.append(float(loss.data))
                hits += int((logits.data.argmax(axis=1) == batch.labels).sum())
            train_acc = hits / max(1, len(train_examples) - skipped)
            val_acc = accuracy(model, val_examples, hyper.batch_size)
            entry = {"epoch": epoch, "train_loss": float(np.mean(losses)),
                     "train_acc": train_acc, "val_acc": val_acc}
            log.append(entry)
            if log_fh is not None:
                log_fh.write(json.dumps(entry) + "\n")
            if val_acc > best_val:
                best_val = val_acc
                best_snapshot = _model_state(model)
            if (early_stop_train_acc is not None
                    and train_acc >= early_stop_train_acc):
                break
            if early_stop_val_acc is not None and val_acc >= early_stop_val_acc:
                break
        if best_snapshot is not None:
            _restore_state(model, best_snapshot)
    finally:
        if log_fh is not None:
            log_fh.close()
    return {"log": log, "best_val_acc": best_val}


# ---------------------------------------------------------------------------
# Saliency
# ---------------------------------------------------------------------------

def bilinear_upsample(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = grid.shape
    ys = np.linspace(0, h - 1, out_h)
    xs = np.linspace(0, w - 1, out_w)
    rows = np.empty((h, out_w))
    for i in range(h):
        rows[i] = np.interp(xs, np.arange(w), grid[i])
    out = np.empty((out_h, out_w))
    for j in range(out_w):
        out[:, j] = np.interp(ys, np.arange(h), rows[:, j])
    return out


def saliency(model: AudioQAModel, example: Example) -> np.ndarray:
    """Channel-norm of d(predicted logit)/d(final modulated activations),
    upsampled to the example's (T, 64) feature grid."""
    if model.config.kind == "fcn":
        raise ValueError("saliency requires a modulated model (film or malimo)")
    batch = collate([example])
    taps: dict = {}
    logits = model.forward(batch, training=False, taps=taps)
    k = int(logits.data[0].argmax())
    target = ops.slice_axis(ops.slice_axis(logits, 1, k, k + 1), 0, 0, 1)
    target.backward(np.ones_like(target.data))
    grad = taps["modulated"].grad[0]              # (C, h', w')
    norms = np.sqrt((grad.astype(np.float64) ** 2).sum(axis=0))
    t_frames, n_mel = example.feat.shape
    return bilinear_upsample(norms, n_mel, t_frames).T  # (T, 64)


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then raw little-endian payloads
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, model: AudioQAModel) -> None:
    entries = []
    blobs = []
    offset = 0

    def push(name, arr, trainable):
        nonlocal offset
        data = np.ascontiguousarray(arr)
        code = "<f4" if data.dtype == np.float32 else "<f8"
        raw = data.astype(code).tobytes()
        entries.append({"name": name, "shape": list(data.shape), "dtype": code,
                        "offset": offset, "trainable": trainable})
        blobs.append(raw)
        offset += len(raw)

    for name, t in model.named_parameters():
        push(name, t.data, True)
    for name, bn in model.batchnorms():
        push(f"{name}.running_mean", bn.running_mean, False)
        push(f"{name}.running_var", bn.running_var, False)
    header = {
        "format": 1,
        "precision": "single" if model.dtype == np.float32 else "double",
        "config": asdict(model.config),
        "entries": entries,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> AudioQAModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    config = ModelConfig(**header["config"])
    dtype = np.float32 if header["precision"] == "single" else np.float64
    model = build_model(config, seed=0, dtype=dtype)
    named = dict(model.named_parameters())
    buffers = {f"{n}.running_mean": bn for n, bn in model.batchnorms()}
    buffers_var = {f"{n}.running_var": bn for n, bn in model.batchnorms()}
    for entry in header["entries"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        raw = payload[entry["offset"]:entry["offset"] + count *
                      np.dtype(entry["dtype"]).itemsize]
        arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"])
        name = entry["name"]
        if entry["trainable"]:
            named[name].data = arr.astype(dtype).copy()
        elif name in buffers:
            buffers[name].running_mean = arr.astype(dtype).copy()
        elif name in buffers_var:
            buffers_var[name].running_var = arr.astype(dtype).copy()
    return model
