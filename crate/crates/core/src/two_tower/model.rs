use std::borrow::Borrow;

use super::features::{ItemFeatureBundle, UserProfile};
use crate::error::{Error, Result};
use crate::numerics::{l2_normalize_rows, Matrix, Mlp};
use crate::rng;

/// Widths of the tower input slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TowerDims {
    pub d_gnn: usize,
    pub d_text: usize,
    pub d_id: usize,
    pub aux_dim: usize,
}

impl TowerDims {
    /// `[gnn ‖ text ‖ id]`
    pub fn item_input(&self) -> usize {
        self.d_gnn + self.d_text + self.d_id
    }

    /// `[gnn history mean ‖ id history mean ‖ aux taste]`
    pub fn user_input(&self) -> usize {
        self.d_gnn + self.d_id + self.aux_dim
    }
}

/// Both towers plus the id-embedding table they share.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerParams {
    pub dims: TowerDims,
    /// When false the foundation-embedding slots are fed zeros.
    pub use_gnn_features: bool,
    /// One row per catalog item, in catalog order.
    pub id_table: Matrix,
    pub item_tower: Mlp,
    pub user_tower: Mlp,
}

impl TwoTowerParams {
    pub fn init(
        dims: TowerDims,
        n_items: usize,
        hidden: &[usize],
        d_final: usize,
        use_gnn_features: bool,
        seed: u64,
    ) -> Self {
        let mut r = rng::stream(seed, &[0x2704]);
        let id_table = Matrix::glorot(n_items, dims.d_id, &mut r);
        let item_tower = Mlp::glorot(dims.item_input(), hidden, d_final, &mut r);
        let user_tower = Mlp::glorot(dims.user_input(), hidden, d_final, &mut r);
        TwoTowerParams { dims, use_gnn_features, id_table, item_tower, user_tower }
    }

    pub fn zeros_like(&self) -> Self {
        TwoTowerParams {
            dims: self.dims,
            use_gnn_features: self.use_gnn_features,
            id_table: Matrix::zeros(self.id_table.rows(), self.id_table.cols()),
            item_tower: self.item_tower.zeros_like(),
            user_tower: self.user_tower.zeros_like(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.id_table.rows()
    }

    pub fn d_final(&self) -> usize {
        self.item_tower.output_dim()
    }

    pub fn param_len(&self) -> usize {
        self.id_table.as_slice().len() + self.item_tower.param_len() + self.user_tower.param_len()
    }

    /// Table, then item tower, then user tower.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        out.extend_from_slice(self.id_table.as_slice());
        self.item_tower.write_flat(&mut out);
        self.user_tower.write_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, src: &[f64]) {
        let n = self.id_table.as_slice().len();
        self.id_table.as_mut_slice().copy_from_slice(&src[..n]);
        let n = n + self.item_tower.read_flat(&src[n..]);
        self.user_tower.read_flat(&src[n..]);
    }

    pub fn add_assign(&mut self, other: &TwoTowerParams) {
        let mut a = self.to_flat();
        a.iter_mut().zip(other.to_flat()).for_each(|(x, y)| *x += y);
        self.set_flat(&a);
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Errors unless the model fits a catalog of `n_items` with the given
    /// foundation and text widths.
    pub fn check_compatible(&self, n_items: usize, d_gnn: usize, d_text: usize) -> Result<()> {
        check_len("id table rows", n_items, self.n_items())?;
        check_len("foundation embedding width", d_gnn, self.dims.d_gnn)?;
        check_len("text feature width", d_text, self.dims.d_text)
    }

    /// Structural consistency of the declared dims with the matrices.
    pub(crate) fn validate(&self) -> Result<()> {
        let d = self.dims;
        let checks = [
            ("id table width", d.d_id, self.id_table.cols()),
            ("item tower input", d.item_input(), self.item_tower.input_dim()),
            ("user tower input", d.user_input(), self.user_tower.input_dim()),
            ("user tower output", self.item_tower.output_dim(), self.user_tower.output_dim()),
        ];
        for (context, expected, actual) in checks {
            if expected != actual {
                return Err(Error::DimensionMismatch { context, expected, actual });
            }
        }
        Ok(())
    }
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { context, expected, actual });
    }
    Ok(())
}

pub(crate) fn item_inputs<B: Borrow<ItemFeatureBundle>>(params: &TwoTowerParams, bundles: &[B]) -> Result<Matrix> {
    let d = params.dims;
    let mut x = Matrix::zeros(bundles.len(), d.item_input());
    for (i, b) in bundles.iter().enumerate() {
        let b = b.borrow();
        check_len("item gnn slot", d.d_gnn, b.gnn.len())?;
        check_len("item text slot", d.d_text, b.text.len())?;
        if b.id_row >= params.n_items() {
            return Err(Error::DimensionMismatch { context: "item id row", expected: params.n_items(), actual: b.id_row });
        }
        let row = x.row_mut(i);
        if params.use_gnn_features {
            row[..d.d_gnn].copy_from_slice(&b.gnn);
        }
        row[d.d_gnn..d.d_gnn + d.d_text].copy_from_slice(&b.text);
        row[d.d_gnn + d.d_text..].copy_from_slice(params.id_table.row(b.id_row));
    }
    Ok(x)
}

pub(crate) fn user_inputs<P: Borrow<UserProfile>>(params: &TwoTowerParams, profiles: &[P]) -> Result<Matrix> {
    let d = params.dims;
    let mut x = Matrix::zeros(profiles.len(), d.user_input());
    for (i, p) in profiles.iter().enumerate() {
        let p = p.borrow();
        check_len("profile gnn slot", d.d_gnn, p.gnn_history_mean.len())?;
        check_len("profile aux slot", d.aux_dim, p.aux_taste.len())?;
        if let Some(&r) = p.history_rows.iter().find(|&&r| r >= params.n_items()) {
            return Err(Error::DimensionMismatch { context: "history id row", expected: params.n_items(), actual: r });
        }
        let row = x.row_mut(i);
        if params.use_gnn_features {
            row[..d.d_gnn].copy_from_slice(&p.gnn_history_mean);
        }
        row[d.d_gnn..d.d_gnn + d.d_id].copy_from_slice(&p.id_history_mean(&params.id_table));
        row[d.d_gnn + d.d_id..].copy_from_slice(&p.aux_taste);
    }
    Ok(x)
}

/// Unit-norm (or zero) item vectors, one row per bundle.
pub fn item_tower_batch<B: Borrow<ItemFeatureBundle>>(params: &TwoTowerParams, bundles: &[B]) -> Result<Matrix> {
    let x = item_inputs(params, bundles)?;
    Ok(l2_normalize_rows(&params.item_tower.forward(x)?.output))
}

/// Unit-norm (or zero) user vectors, one row per profile.
pub fn user_tower_batch<P: Borrow<UserProfile>>(params: &TwoTowerParams, profiles: &[P]) -> Result<Matrix> {
    let x = user_inputs(params, profiles)?;
    Ok(l2_normalize_rows(&params.user_tower.forward(x)?.output))
}

pub fn item_tower_forward(bundle: &ItemFeatureBundle, params: &TwoTowerParams) -> Result<Vec<f64>> {
    Ok(item_tower_batch(params, &[bundle])?.into_vec())
}

pub fn user_tower_forward(profile: &UserProfile, params: &TwoTowerParams) -> Result<Vec<f64>> {
    Ok(user_tower_batch(params, &[profile])?.into_vec())
}
