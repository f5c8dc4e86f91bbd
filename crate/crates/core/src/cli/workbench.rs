use crate::datasets::{FeatureMatrix, InteractionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{GramMatrix, GramSource};
use crate::models::{blend, cosine_similarity_matrix, ease_from_gram, l3ae_from_gram, Hyperparams, ItemWeightMatrix};

use super::ModelKind;

/// Training data plus cached Gram matrices, shared by every fit of a run.
pub struct Workbench {
    pub train: InteractionMatrix,
    gram_x: GramMatrix,
    tags: Option<(FeatureMatrix, GramMatrix)>,
    embeddings: Option<(FeatureMatrix, GramMatrix)>,
}

fn need(name: &str, model: ModelKind, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("model {model} needs {name}")))
}

impl Workbench {
    pub fn new(train: InteractionMatrix, tags: Option<FeatureMatrix>, embeddings: Option<FeatureMatrix>) -> Result<Self> {
        let gram_x = train.gram()?;
        let with_gram = |f: Option<FeatureMatrix>| -> Result<Option<(FeatureMatrix, GramMatrix)>> {
            f.map(|f| {
                f.check_aligned(&train)?;
                let g = f.gram()?;
                Ok((f, g))
            })
            .transpose()
        };
        let tags = with_gram(tags)?;
        let embeddings = with_gram(embeddings)?;
        Ok(Self { train, gram_x, tags, embeddings })
    }

    pub fn embeddings(&self) -> Option<&FeatureMatrix> {
        self.embeddings.as_ref().map(|(f, _)| f)
    }

    fn feature_gram(&self, model: ModelKind) -> Result<&GramMatrix> {
        let (src, what) = if model.needs_tags() { (&self.tags, "tags") } else { (&self.embeddings, "embeddings") };
        src.as_ref()
            .map(|(_, g)| g)
            .ok_or_else(|| Error::Config(format!("model {model} needs {what}")))
    }

    fn finish(&self, mut w: ItemWeightMatrix, model: ModelKind, hp: Hyperparams) -> ItemWeightMatrix {
        w.model = model.as_str().to_string();
        w.hyperparams = hp;
        w.item_ids = self.train.item_ids().clone();
        w
    }

    /// EASE on interactions.
    pub fn ease(&self, lambda: f64) -> Result<ItemWeightMatrix> {
        let hp = Hyperparams { lambda: Some(lambda), ..Default::default() };
        Ok(self.finish(ease_from_gram(&self.gram_x, lambda, "", hp, self.train.item_ids().clone())?, ModelKind::Ease, hp))
    }

    /// Phase-1 semantic matrix `S` (EASE on `F`).
    pub fn semantic(&self, lambda_f: f64) -> Result<ItemWeightMatrix> {
        let hp = Hyperparams { lambda_f: Some(lambda_f), ..Default::default() };
        let g = self.feature_gram(ModelKind::LlmEase)?;
        Ok(self.finish(ease_from_gram(g, lambda_f, "", hp, self.train.item_ids().clone())?, ModelKind::LlmEase, hp))
    }

    /// Feature-side component `D` of an additive model.
    pub fn feature_component(&self, model: ModelKind, lambda_t: f64) -> Result<ItemWeightMatrix> {
        ease_from_gram(self.feature_gram(model)?, lambda_t, "feature-ease", Hyperparams::default(), self.train.item_ids().clone())
    }

    /// `β·C + (1−β)·D` labelled as `model`.
    pub fn additive(&self, model: ModelKind, c: &ItemWeightMatrix, d: &ItemWeightMatrix, beta: f64) -> Result<ItemWeightMatrix> {
        let hp = Hyperparams {
            lambda_x: c.hyperparams.lambda,
            lambda_t: d.hyperparams.lambda_t,
            beta: Some(beta),
            ..Default::default()
        };
        Ok(self.finish(blend(c, d, beta)?, model, hp))
    }

    pub fn collective(&self, model: ModelKind, alpha: f64, lambda: f64) -> Result<ItemWeightMatrix> {
        if !(alpha >= 0.0) {
            return Err(Error::Param(format!("alpha must be non-negative, got {alpha}")));
        }
        let g = self.gram_x.add_scaled(self.feature_gram(model)?, alpha)?;
        let hp = Hyperparams { lambda: Some(lambda), alpha: Some(alpha), ..Default::default() };
        Ok(self.finish(ease_from_gram(&g, lambda, "", hp, self.train.item_ids().clone())?, model, hp))
    }

    /// Phase 2 against a ready `S`.
    pub fn l3ae(&self, s: &ItemWeightMatrix, lambda_x: f64, lambda_kd: f64) -> Result<ItemWeightMatrix> {
        if s.item_ids[..] != self.train.item_ids()[..] {
            return Err(Error::Data("semantic matrix items differ from the training items".into()));
        }
        let hp = Hyperparams {
            lambda_x: Some(lambda_x),
            lambda_kd: Some(lambda_kd),
            lambda_f: s.hyperparams.lambda_f,
            ..Default::default()
        };
        Ok(self.finish(l3ae_from_gram(&self.gram_x, &s.values, lambda_x, lambda_kd)?, ModelKind::L3ae, hp))
    }

    pub fn cosine(&self) -> Result<ItemWeightMatrix> {
        let f = self.embeddings().ok_or_else(|| Error::Config("model cosine needs embeddings".into()))?;
        Ok(self.finish(cosine_similarity_matrix(f)?, ModelKind::Cosine, Hyperparams::default()))
    }

    /// Fits `model` at fixed hyperparameters. `semantic` supplies a cached
    /// phase-1 matrix for `l3ae`; otherwise it is fitted from `lambda_f`.
    pub fn fit(&self, model: ModelKind, hp: Hyperparams, semantic: Option<&ItemWeightMatrix>) -> Result<ItemWeightMatrix> {
        match model {
            ModelKind::Ease => self.ease(need("lambda", model, hp.lambda)?),
            ModelKind::LlmEase => self.semantic(need("lambda_f", model, hp.lambda_f)?),
            ModelKind::Cosine => self.cosine(),
            ModelKind::Cease | ModelKind::LlmCease => {
                self.collective(model, need("alpha", model, hp.alpha)?, need("lambda", model, hp.lambda)?)
            }
            ModelKind::AddEase | ModelKind::LlmAddEase => {
                let lambda_x = need("lambda_x", model, hp.lambda_x)?;
                let lambda_t = need("lambda_t", model, hp.lambda_t)?;
                let beta = need("beta", model, hp.beta)?;
                let c = self.ease(lambda_x)?;
                let mut d = self.feature_component(model, lambda_t)?;
                d.hyperparams.lambda_t = Some(lambda_t);
                self.additive(model, &c, &d, beta)
            }
            ModelKind::L3ae => {
                let lambda_x = need("lambda_x", model, hp.lambda_x)?;
                let lambda_kd = need("lambda_kd", model, hp.lambda_kd)?;
                let fitted;
                let s = match semantic {
                    Some(s) => s,
                    None => {
                        fitted = self.semantic(need("lambda_f", model, hp.lambda_f)?)?;
                        &fitted
                    }
                };
                self.l3ae(s, lambda_x, lambda_kd)
            }
        }
    }
}
