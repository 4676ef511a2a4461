"""The assembled network: encoders, shared-space projections, discrepancy path and fusion head."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Sample
from .embedding import FeatureStore, HashedTextEncoder, PassthroughImageEncoder, ProjectionHead
from .errors import ConfigError, DataError, ShapeError
from .fusion import FusionHead, FusionParams
from .gdrm import DiscrepancyMLP, SentimentLexicon, default_lexicon, sentiment_discrepancy, sentiment_score_lexicon
from .ops import paired_cosine, paired_cosine_backward

ABLATION_FLAGS = frozenset({"no_gdrm", "no_semd", "no_send", "symmetric_contrastive"})


@dataclass(frozen=True)
class ModelDims:
    d_t: int = 512
    d_v: int = 768
    d_z: int = 128
    d_fused: int = 128
    d_f: int = 128
    disc_hidden: int = 64
    head_hidden: int = 16


def check_flags(flags) -> frozenset:
    flags = frozenset(flags or ())
    unknown = flags - ABLATION_FLAGS
    if unknown:
        raise ConfigError(f"unknown ablation flag(s): {', '.join(sorted(unknown))}")
    return flags


@dataclass(eq=False)
class Batch:
    """Encoder outputs for a list of samples. Sentiment distance is a constant input."""

    ids: list
    labels: np.ndarray
    h_text: np.ndarray
    h_caption: np.ndarray
    h_image: np.ndarray
    d_sen: np.ndarray

    def __len__(self):
        return len(self.ids)

    def take(self, idx):
        idx = list(idx)
        return Batch(
            [self.ids[i] for i in idx],
            self.labels[idx],
            self.h_text[idx],
            self.h_caption[idx],
            self.h_image[idx],
            self.d_sen[idx],
        )


class GDCNet:
    def __init__(self, dims: ModelDims = ModelDims(), seed: int = 0, store: FeatureStore | None = None,
                 lexicon: SentimentLexicon | None = None, flags=()):
        self.dims = dims
        self.flags = check_flags(flags)
        self.text_encoder = HashedTextEncoder(dims.d_t)
        self.image_encoder = PassthroughImageEncoder(dims.d_v, store)
        self.lexicon = lexicon or default_lexicon()
        rng = np.random.default_rng(seed)
        self.proj_text = ProjectionHead.init(rng, dims.d_t, dims.d_z, input_space="text_raw", output_space="shared")
        self.proj_image = ProjectionHead.init(rng, dims.d_v, dims.d_z, input_space="image_raw", output_space="shared")
        self.dmlp = DiscrepancyMLP.init(rng, dims.disc_hidden, dims.d_f)
        self.fusion = FusionParams.init(rng, dims.d_z, dims.d_z, dims.d_f, dims.d_fused, dims.head_hidden)
        self._feature_cache: dict = {}

    # parameters -------------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Named trainable arrays. The arrays are the live storage; update them in place."""
        f = self.fusion
        params = {
            "proj_text.weight": self.proj_text.weight,
            "proj_text.bias": self.proj_text.bias,
            "proj_image.weight": self.proj_image.weight,
            "proj_image.bias": self.proj_image.bias,
            "gdrm.W1": self.dmlp.layer1.weight,
            "gdrm.b1": self.dmlp.layer1.bias,
            "gdrm.W2": self.dmlp.layer2.weight,
            "gdrm.b2": self.dmlp.layer2.bias,
        }
        for name in ("proj_T", "proj_I", "proj_D", "classifier_T", "classifier_I", "classifier_D",
                     "classifier_fused", "head_hidden", "head_out"):
            lin = getattr(f, name)
            params[f"fusion.{name}.weight"] = lin.weight
            params[f"fusion.{name}.bias"] = lin.bias
        for name in ("W_T", "W_I", "W_D"):
            params[f"fusion.{name}"] = getattr(f, name)
        return params

    def backbone_parameters(self) -> dict[str, np.ndarray]:
        """Trainables exposed by the encoder providers (the low-learning-rate group)."""
        out = {}
        for prefix, enc in (("text_encoder", self.text_encoder), ("image_encoder", self.image_encoder)):
            for k, v in enc.parameters().items():
                out[f"{prefix}.{k}"] = v
        return out

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        live = self.parameters()
        missing = set(live) - set(values)
        extra = set(values) - set(live)
        if missing or extra:
            raise ShapeError(f"parameter names differ: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in live.items():
            src = np.asarray(values[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise ShapeError(f"{name}: expected shape {arr.shape}, got {src.shape}")
            np.copyto(arr, src)

    def with_flags(self, flags) -> "GDCNet":
        """A view sharing all parameters but running under different ablation flags."""
        view = copy.copy(self)
        view.flags = check_flags(flags)
        return view

    def clone(self) -> "GDCNet":
        twin = copy.copy(self)
        twin.proj_text = copy.deepcopy(self.proj_text)
        twin.proj_image = copy.deepcopy(self.proj_image)
        twin.dmlp = copy.deepcopy(self.dmlp)
        twin.fusion = copy.deepcopy(self.fusion)
        return twin

    # featurisation ----------------------------------------------------

    def featurize(self, samples: list[Sample]) -> Batch:
        rows = []
        for s in samples:
            key = (s.id, s.text, s.caption, s.image_vec, s.image_path)
            row = self._feature_cache.get(key)
            if row is None:
                if not s.has_caption:
                    raise DataError(f"sample {s.id} has no caption attached")
                ht = self.text_encoder(s.text).values
                hc = self.text_encoder(s.caption).values
                hv = self.image_encoder(s).values
                d_sen = sentiment_discrepancy(
                    sentiment_score_lexicon(s.text, self.lexicon), sentiment_score_lexicon(s.caption, self.lexicon)
                )
                row = (ht, hc, hv, d_sen)
                self._feature_cache[key] = row
            rows.append(row)
        return Batch(
            ids=[s.id for s in samples],
            labels=np.array([float(s.label) for s in samples]),
            h_text=np.stack([r[0] for r in rows]),
            h_caption=np.stack([r[1] for r in rows]),
            h_image=np.stack([r[2] for r in rows]),
            d_sen=np.array([r[3] for r in rows]),
        )

    # forward / backward -----------------------------------------------

    @property
    def use_discrepancy(self) -> bool:
        return "no_gdrm" not in self.flags

    def forward(self, batch: Batch):
        """Return (output logits, shared-space features, cache)."""
        z_t = self.proj_text(batch.h_text)
        z_c = self.proj_text(batch.h_caption)
        z_v = self.proj_image(batch.h_image)
        cos_tc, cache_tc = paired_cosine(z_t, z_c)
        cos_vc, cache_vc = paired_cosine(z_v, z_c)
        d_sem = 1.0 - cos_tc
        d_sen = batch.d_sen.copy()
        if "no_semd" in self.flags:
            d_sem = np.zeros_like(d_sem)
        if "no_send" in self.flags:
            d_sen = np.zeros_like(d_sen)
        D = np.stack([d_sem, d_sen, cos_vc], axis=1)
        f_d, cache_mlp = self.dmlp.forward(D)
        head = FusionHead(self.fusion, self.use_discrepancy)
        out, cache_head = head.forward(z_t, z_v, f_d)
        cache = (batch, z_t, z_c, z_v, cache_tc, cache_vc, cache_mlp, head, cache_head)
        return out, {"z_text": z_t, "z_caption": z_c, "z_image": z_v, "D": D}, cache

    def discrepancy_triples(self, batch: Batch) -> np.ndarray:
        return self.forward(batch)[1]["D"]

    def predict_proba(self, batch: Batch) -> np.ndarray:
        from .ops import sigmoid

        return sigmoid(self.forward(batch)[0])

    def backward(self, dout, cache, dz_t_extra=None, dz_v_extra=None):
        """Gradients of all parameters given d(loss)/d(output logit).

        ``dz_*_extra`` carry gradients that reach the shared-space
        embeddings from other loss terms (the contrastive loss).
        """
        batch, z_t, z_c, z_v, cache_tc, cache_vc, cache_mlp, head, cache_head = cache
        g_head, dz_t, dz_v, df_d = head.backward(dout, cache_head)
        grads = {f"fusion.{k}": v for k, v in g_head.items()}
        g_mlp, dD = self.dmlp.backward(df_d, cache_mlp)
        grads.update({f"gdrm.{k}": v for k, v in g_mlp.items()})

        dsem = dD[:, 0] if "no_semd" not in self.flags else np.zeros(len(batch))
        dz_t_a, dz_c_a = paired_cosine_backward(-dsem, cache_tc)
        dz_v_b, dz_c_b = paired_cosine_backward(dD[:, 2], cache_vc)
        dz_t = dz_t + dz_t_a
        dz_c = dz_c_a + dz_c_b
        dz_v = dz_v + dz_v_b
        if dz_t_extra is not None:
            dz_t = dz_t + dz_t_extra
        if dz_v_extra is not None:
            dz_v = dz_v + dz_v_extra

        dWt1, dbt1, _ = self.proj_text.backward(batch.h_text, dz_t)
        dWt2, dbt2, _ = self.proj_text.backward(batch.h_caption, dz_c)
        grads["proj_text.weight"] = dWt1 + dWt2
        grads["proj_text.bias"] = dbt1 + dbt2
        grads["proj_image.weight"], grads["proj_image.bias"], _ = self.proj_image.backward(batch.h_image, dz_v)
        return grads

    def config_dict(self) -> dict:
        return {"dims": asdict(self.dims), "flags": sorted(self.flags)}
