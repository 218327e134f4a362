use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{Group, ParamId, ParameterStore};
use super::NnetError;
use crate::dataset::ImageTensor;
use crate::percept::VoxelGrid;
use crate::scene::VIEW_COUNT;

/// Token and feature sizes of the fusion network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Per-view visual feature length L_I.
    pub l_i: usize,
    /// UAV representation length L_m.
    pub l_m: usize,
    /// Vehicle representation length L_v.
    pub l_v: usize,
    /// Token length L_c.
    pub l_c: usize,
    /// Base coefficient c of the sinusoidal sequence embedding.
    pub sinusoid_base: f64,
    pub heads: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            l_i: 64,
            l_m: 128,
            l_v: 128,
            l_c: 128,
            sinusoid_base: 10_000.0,
            heads: 1,
        }
    }
}

/// Layer widths of the convolutional extractors and the inspection head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Output channels of the three stride-2 blocks of the per-view CNN.
    pub ufe_channels: [usize; 3],
    /// Channels of the convolution that fuses the stacked view features.
    pub fusion_channels: usize,
    /// Output channels of the three stride-2 blocks of the voxel CNN.
    pub vfe_channels: [usize; 3],
    pub tih_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            ufe_channels: [8, 16, 32],
            fusion_channels: 4,
            vfe_channels: [8, 16, 32],
            tih_hidden: 64,
        }
    }
}

/// Everything needed to rebuild a network with the same parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fusion: FusionConfig,
    pub arch: ArchConfig,
    /// channels, height, width of one view.
    pub image_shape: [usize; 3],
    pub grid_shape: [usize; 3],
    pub num_links: usize,
    pub num_lanes: usize,
    pub relays: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnetError> {
        let f = &self.fusion;
        let bad = |m: &str| Err(NnetError::Config(m.to_string()));
        if [f.l_i, f.l_m, f.l_v, f.l_c, f.heads].contains(&0) {
            return bad("fusion lengths and heads must be at least 1");
        }
        if f.l_c % f.heads != 0 {
            return bad("l_c must be divisible by heads");
        }
        if !(f.sinusoid_base > 1.0) {
            return bad("sinusoid_base must exceed 1");
        }
        if self.image_shape.contains(&0) || self.grid_shape.contains(&0) || self.num_links == 0 || self.num_lanes == 0 {
            return bad("image, grid, link and lane dimensions must be positive");
        }
        if self.arch.ufe_channels.contains(&0) || self.arch.vfe_channels.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.arch.fusion_channels == 0 || self.arch.tih_hidden == 0 {
            return bad("layer widths must be positive");
        }
        Ok(())
    }
}

/// `e[j] = sin(seq / c^(j/L))` for even `j`, `cos(seq / c^((j−1)/L))` for odd.
pub fn sequence_embedding(seq: usize, l_c: usize, c: f64) -> Vec<f64> {
    (0..l_c)
        .map(|j| {
            let even = j - j % 2;
            let arg = seq as f64 / c.powf(even as f64 / l_c as f64);
            if j % 2 == 0 {
                arg.sin()
            } else {
                arg.cos()
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentType {
    Lidar,
    Rgb,
    Coop,
}

/// A raw agent feature with its type, 1-based sequence position and
/// presence flag. Absent tokens take no part in attention.
#[derive(Clone, Copy, Debug)]
pub struct AgentToken {
    pub agent: AgentType,
    pub seq: usize,
    pub present: bool,
    pub feature: Var,
}

/// Sequence positions: the cooperation token first, the LiDAR token second,
/// then relay slots.
pub const SEQ_COOP: usize = 1;
pub const SEQ_LIDAR: usize = 2;
pub fn seq_for_slot(slot: usize) -> usize {
    3 + slot
}

#[derive(Clone, Debug)]
pub struct Fused {
    pub h: Var,
    /// Attention weights per head over the present tokens, in input order.
    pub weights: Vec<Var>,
}

#[derive(Clone, Debug)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct LinearIds {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Clone, Debug)]
struct Ids {
    ufe_convs: Vec<ConvIds>,
    ufe_view: LinearIds,
    ufe_fusion: ConvIds,
    ufe_out: LinearIds,
    vfe_convs: Vec<ConvIds>,
    vfe_out: LinearIds,
    proj_lidar: LinearIds,
    proj_rgb: LinearIds,
    coop: ParamId,
    type_lidar: ParamId,
    type_rgb: ParamId,
    type_coop: ParamId,
    w_q: LinearIds,
    w_k: LinearIds,
    w_v: LinearIds,
    head: LinearIds,
    tih1: LinearIds,
    tih2: LinearIds,
}

/// UAP-Net: image and voxel extractors, cross-agent fusion, handoff head and
/// traffic inspection head, over one parameter store.
#[derive(Clone, Debug)]
pub struct UapNet {
    pub config: ModelConfig,
    pub store: ParameterStore,
    ids: Ids,
}

fn stride2_out(n: usize) -> usize {
    (n + 2 - 3) / 2 + 1
}

impl UapNet {
    pub fn new(config: ModelConfig) -> Result<Self, NnetError> {
        config.validate()?;
        let seed = config.init_seed;
        let mut s = ParameterStore::new();
        let f = config.fusion.clone();
        let a = config.arch.clone();

        let conv = |s: &mut ParameterStore, name: &str, g: Group, shape: [usize; 5]| -> Result<ConvIds, NnetError> {
            Ok(ConvIds {
                w: s.add_weight(&format!("{name}.w"), g, shape.to_vec(), seed)?,
                b: s.add_zeros(&format!("{name}.b"), g, vec![shape[0]])?,
            })
        };
        let linear = |s: &mut ParameterStore, name: &str, g: Group, out: usize, inp: usize, bias: bool| -> Result<LinearIds, NnetError> {
            Ok(LinearIds {
                w: s.add_weight(&format!("{name}.w"), g, vec![out, inp], seed)?,
                b: if bias {
                    Some(s.add_zeros(&format!("{name}.b"), g, vec![out])?)
                } else {
                    None
                },
            })
        };

        let [ic, ih, iw] = config.image_shape;
        let mut ufe_convs = Vec::new();
        let mut c_in = ic;
        for (i, &c) in a.ufe_channels.iter().enumerate() {
            ufe_convs.push(conv(&mut s, &format!("ufe.conv{i}"), Group::Ufe, [c, c_in, 1, 3, 3])?);
            c_in = c;
        }
        let ufe_view = linear(&mut s, "ufe.view", Group::Ufe, f.l_i, c_in, true)?;
        let ufe_fusion = conv(&mut s, "ufe.fusion", Group::Ufe, [a.fusion_channels, 1, 1, 3, 3])?;
        let ufe_out = linear(&mut s, "ufe.out", Group::Ufe, f.l_m, a.fusion_channels * VIEW_COUNT * f.l_i, true)?;
        let _ = (ih, iw);

        let mut vfe_convs = Vec::new();
        let mut c_in = 1;
        let mut dims = config.grid_shape;
        for (i, &c) in a.vfe_channels.iter().enumerate() {
            vfe_convs.push(conv(&mut s, &format!("vfe.conv{i}"), Group::Vfe, [c, c_in, 3, 3, 3])?);
            c_in = c;
            dims = dims.map(stride2_out);
        }
        let vfe_out = linear(&mut s, "vfe.out", Group::Vfe, f.l_v, c_in * dims.iter().product::<usize>(), true)?;

        // Attention layers have no ReLU after them and keep unit gain.
        let plain = |s: &mut ParameterStore, name: &str, out: usize, inp: usize, bias: bool| -> Result<LinearIds, NnetError> {
            Ok(LinearIds {
                w: s.add_uniform(&format!("{name}.w"), Group::Acaf, vec![out, inp], seed, (3.0 / inp as f64).sqrt())?,
                b: if bias {
                    Some(s.add_zeros(&format!("{name}.b"), Group::Acaf, vec![out])?)
                } else {
                    None
                },
            })
        };
        let proj_lidar = plain(&mut s, "acaf.proj_lidar", f.l_c, f.l_v, true)?;
        let proj_rgb = plain(&mut s, "acaf.proj_rgb", f.l_c, f.l_m, true)?;
        let coop = s.add_uniform("acaf.coop", Group::Acaf, vec![f.l_c], seed, (3.0 / f.l_c as f64).sqrt())?;
        let type_lidar = s.add_zeros("acaf.type_lidar", Group::Acaf, vec![f.l_c])?;
        let type_rgb = s.add_zeros("acaf.type_rgb", Group::Acaf, vec![f.l_c])?;
        let type_coop = s.add_zeros("acaf.type_coop", Group::Acaf, vec![f.l_c])?;
        let w_q = plain(&mut s, "acaf.w_q", f.l_c, f.l_c, false)?;
        let w_k = plain(&mut s, "acaf.w_k", f.l_c, f.l_c, false)?;
        let w_v = plain(&mut s, "acaf.w_v", f.l_c, f.l_c, false)?;
        // Zero output weights start the head at uniform probabilities.
        let head = LinearIds {
            w: s.add_zeros("head.out.w", Group::HandoffHead, vec![config.num_links, f.l_c])?,
            b: Some(s.add_zeros("head.out.b", Group::HandoffHead, vec![config.num_links])?),
        };
        let tih1 = linear(&mut s, "tih.fc1", Group::Tih, a.tih_hidden, f.l_m, true)?;
        let tih2 = linear(&mut s, "tih.fc2", Group::Tih, config.num_lanes, a.tih_hidden, true)?;

        Ok(Self {
            config,
            store: s,
            ids: Ids {
                ufe_convs,
                ufe_view,
                ufe_fusion,
                ufe_out,
                vfe_convs,
                vfe_out,
                proj_lidar,
                proj_rgb,
                coop,
                type_lidar,
                type_rgb,
                type_coop,
                w_q,
                w_k,
                w_v,
                head,
                tih1,
                tih2,
            },
        })
    }

    /// Rebuilds the layout from `config` and takes values from `store`.
    pub fn with_store(config: ModelConfig, store: &ParameterStore) -> Result<Self, NnetError> {
        let mut net = Self::new(config)?;
        net.store.copy_values_from(store)?;
        for g in Group::ALL {
            net.store.set_frozen(g, store.is_frozen(g));
        }
        Ok(net)
    }

    fn lin(&self, g: &mut Graph<'_>, x: Var, ids: &LinearIds) -> Result<Var, NnetError> {
        let w = g.param(ids.w);
        let b = ids.b.map(|b| g.param(b));
        g.linear(x, w, b)
    }

    fn conv(&self, g: &mut Graph<'_>, x: Var, ids: &ConvIds, stride: [usize; 3], pad: [usize; 3]) -> Result<Var, NnetError> {
        let w = g.param(ids.w);
        let b = g.param(ids.b);
        g.conv(x, w, b, stride, pad)
    }

    /// Shared per-view CNN over the five views, stacked feature fusion, and
    /// projection to L_m, layer-normalized. Views flagged absent are fed as
    /// zeros.
    pub fn ufe_forward(&self, g: &mut Graph<'_>, images: &ImageTensor, view_present: &[bool; VIEW_COUNT]) -> Result<Var, NnetError> {
        let [c, h, w] = self.config.image_shape;
        if (images.channels, images.height, images.width) != (c, h, w) {
            return Err(NnetError::Shape(format!(
                "image {}x{}x{} vs configured {c}x{h}x{w}",
                images.channels, images.height, images.width
            )));
        }
        let mut feats = Vec::with_capacity(VIEW_COUNT);
        for (v, &present) in view_present.iter().enumerate() {
            let data: Vec<f64> = if present {
                images.view(v).iter().map(|&x| x as f64).collect()
            } else {
                vec![0.0; c * h * w]
            };
            let mut x = g.input(vec![c, 1, h, w], data)?;
            for ids in &self.ids.ufe_convs {
                x = self.conv(g, x, ids, [1, 2, 2], [0, 1, 1])?;
                x = g.relu(x);
            }
            let pooled = g.mean_pool(x);
            let f = self.lin(g, pooled, &self.ids.ufe_view)?;
            feats.push(g.relu(f));
        }
        let stacked = g.concat(&feats);
        let l_i = self.config.fusion.l_i;
        let grid = g.reshape(stacked, vec![1, 1, VIEW_COUNT, l_i])?;
        let fused = self.conv(g, grid, &self.ids.ufe_fusion, [1, 1, 1], [0, 1, 1])?;
        let fused = g.relu(fused);
        let out = self.lin(g, fused, &self.ids.ufe_out)?;
        Ok(g.layer_norm(out))
    }

    /// 3-D CNN over the voxel grid and layer-normalized projection to L_v.
    pub fn vfe_forward(&self, g: &mut Graph<'_>, grid: &VoxelGrid) -> Result<Var, NnetError> {
        if grid.shape != self.config.grid_shape {
            return Err(NnetError::Shape(format!("grid {:?} vs configured {:?}", grid.shape, self.config.grid_shape)));
        }
        let [d, h, w] = grid.shape;
        let mut x = g.input(vec![1, d, h, w], grid.data.iter().map(|&v| v as f64).collect())?;
        for ids in &self.ids.vfe_convs {
            x = self.conv(g, x, ids, [2, 2, 2], [1, 1, 1])?;
            x = g.relu(x);
        }
        let out = self.lin(g, x, &self.ids.vfe_out)?;
        Ok(g.layer_norm(out))
    }

    fn embed(&self, g: &mut Graph<'_>, x: Var, type_id: ParamId, seq: usize) -> Result<Var, NnetError> {
        let f = &self.config.fusion;
        let t = g.param(type_id);
        let x = g.add(x, t)?;
        let e = g.input(vec![f.l_c], sequence_embedding(seq, f.l_c, f.sinusoid_base))?;
        g.add(x, e)
    }

    /// Cross-attention of the cooperation token over the present agent
    /// tokens. With no token present the result is the value projection of
    /// the cooperation token.
    pub fn acaf_fuse(&self, g: &mut Graph<'_>, tokens: &[AgentToken]) -> Result<Fused, NnetError> {
        let f = &self.config.fusion;
        let coop = g.param(self.ids.coop);
        let coop = self.embed(g, coop, self.ids.type_coop, SEQ_COOP)?;
        let q = self.lin(g, coop, &self.ids.w_q)?;

        let mut keys = Vec::new();
        let mut values = Vec::new();
        for t in tokens.iter().filter(|t| t.present) {
            let (proj, type_id) = match t.agent {
                AgentType::Lidar => (&self.ids.proj_lidar, self.ids.type_lidar),
                AgentType::Rgb => (&self.ids.proj_rgb, self.ids.type_rgb),
                AgentType::Coop => return Err(NnetError::Shape("agent tokens cannot have the Coop type".into())),
            };
            let x = self.lin(g, t.feature, proj)?;
            let x = self.embed(g, x, type_id, t.seq)?;
            keys.push(self.lin(g, x, &self.ids.w_k)?);
            values.push(self.lin(g, x, &self.ids.w_v)?);
        }
        if keys.is_empty() {
            log::debug!("no agent token present; fusing the cooperation token alone");
            let h = self.lin(g, coop, &self.ids.w_v)?;
            return Ok(Fused { h, weights: Vec::new() });
        }

        let heads = f.heads;
        let d = f.l_c / heads;
        let mut head_out = Vec::with_capacity(heads);
        let mut weights = Vec::with_capacity(heads);
        for hd in 0..heads {
            let part = |g: &mut Graph<'_>, v: Var| if heads == 1 { Ok(v) } else { g.slice(v, hd * d, d) };
            let qh = part(g, q)?;
            let mut scores = Vec::with_capacity(keys.len());
            for &k in &keys {
                let kh = part(g, k)?;
                scores.push(g.dot(qh, kh)?);
            }
            let s = g.concat(&scores);
            let s = g.scale(s, 1.0 / (d as f64).sqrt());
            let a = g.softmax(s);
            let vh = values.iter().map(|&v| part(g, v)).collect::<Result<Vec<_>, _>>()?;
            head_out.push(g.weighted_sum(a, &vh)?);
            weights.push(a);
        }
        let h = if heads == 1 { head_out[0] } else { g.concat(&head_out) };
        Ok(Fused { h, weights })
    }

    pub fn handoff_logits(&self, g: &mut Graph<'_>, h: Var) -> Result<Var, NnetError> {
        self.lin(g, h, &self.ids.head)
    }

    /// Link probabilities.
    pub fn handoff_head(&self, g: &mut Graph<'_>, h: Var) -> Result<Var, NnetError> {
        let logits = self.handoff_logits(g, h)?;
        Ok(g.softmax(logits))
    }

    /// Two fully connected layers with a ReLU between them.
    pub fn tih_forward(&self, g: &mut Graph<'_>, x_rgb: Var) -> Result<Var, NnetError> {
        let hidden = self.lin(g, x_rgb, &self.ids.tih1)?;
        let hidden = g.relu(hidden);
        self.lin(g, hidden, &self.ids.tih2)
    }
}
