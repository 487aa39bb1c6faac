//! JSON descriptions of fragments and testers.
//!
//! Matrices are row-major nested arrays of `[re, im]` pairs. A fragment is
//! either a circuit (`initial` + `steps`) or a raw operator (`slots` +
//! `choi`); a tester is either a named indicator preset or explicit
//! interventions plus a final POVM.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::comb::{build_fragment, choi_of_channel, Channel, ChannelKind, CircuitFragment, FragmentShape, Slot};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measurement::{build_tester, cc_indicator, dc_indicator, InteractiveMeasurement};
use crate::tensor::{LabeledOperator, SpaceLayout, SystemLabel};

pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_literal(lit: &MatrixLiteral) -> Result<Matrix<f64>> {
    let rows = lit.len();
    let cols = lit.first().map_or(0, |r| r.len());
    if rows == 0 || lit.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput("matrix literal must be a nonempty rectangular array".into()));
    }
    let data = lit.iter().flatten().map(|[re, im]| Complex64::new(*re, *im)).collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn matrix_to_literal(m: &Matrix<f64>) -> MatrixLiteral {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    MaxEntangled { max_entangled: [String; 2] },
    Matrix { matrix: MatrixLiteral, systems: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpSpec {
    Unitary(MatrixLiteral),
    Kraus(Vec<MatrixLiteral>),
    /// Discard the inputs and prepare this state on the outputs.
    Prepare(MatrixLiteral),
    /// Explicit Choi operator on [in…, out…].
    Choi(MatrixLiteral),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    #[serde(flatten)]
    pub op: OpSpec,
    #[serde(rename = "in", default)]
    pub inputs: Vec<String>,
    #[serde(rename = "out", default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace_out: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    #[serde(rename = "in", default)]
    pub inputs: Vec<String>,
    #[serde(rename = "out", default)]
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentSpec {
    pub systems: Vec<SystemLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<SlotSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixLiteral>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    CcIndicator,
    DcIndicator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<SystemLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unitaries: Vec<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<SlotSpec>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interventions: Vec<StepSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub povm: Vec<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub povm_systems: Vec<String>,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("JSON: {e}")))
}

struct Systems<'a>(&'a [SystemLabel]);

impl Systems<'_> {
    fn get(&self, name: &str) -> Result<SystemLabel> {
        self.0.iter().find(|s| s.name == name).cloned().ok_or_else(|| Error::LabelNotFound(name.to_string()))
    }

    fn all(&self, names: &[String]) -> Result<Vec<SystemLabel>> {
        names.iter().map(|n| self.get(n)).collect()
    }

    fn shape(&self, slots: &[SlotSpec]) -> Result<FragmentShape> {
        FragmentShape::new(
            slots
                .iter()
                .map(|s| Ok(Slot { inputs: self.all(&s.inputs)?, outputs: self.all(&s.outputs)? }))
                .collect::<Result<_>>()?,
        )
    }

    fn channel(&self, step: &StepSpec) -> Result<Channel<f64>> {
        let ins = self.all(&step.inputs)?;
        let outs = self.all(&step.outputs)?;
        let ch = match &step.op {
            OpSpec::Unitary(m) => choi_of_channel(ChannelKind::Unitary(matrix_from_literal(m)?), &ins, &outs)?,
            OpSpec::Kraus(ks) => choi_of_channel(
                ChannelKind::Kraus(ks.iter().map(matrix_from_literal).collect::<Result<_>>()?),
                &ins,
                &outs,
            )?,
            OpSpec::Prepare(m) => {
                let prep = Channel::state(matrix_from_literal(m)?, &outs)?;
                if ins.is_empty() {
                    prep
                } else {
                    Channel::trace(&ins)?.parallel(&prep)?
                }
            }
            OpSpec::Choi(m) => {
                let layout = SpaceLayout::new(ins.iter().chain(&outs).cloned().collect())?;
                Channel::from_choi(LabeledOperator::new(layout, matrix_from_literal(m)?)?, &ins, &outs)?
            }
        };
        if step.trace_out.is_empty() {
            Ok(ch)
        } else {
            let names: Vec<&str> = step.trace_out.iter().map(String::as_str).collect();
            ch.trace_outputs(&names)
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedFragment {
    pub fragment: CircuitFragment<f64>,
    /// the initial system–environment state was declared maximally entangled
    pub max_entangled_init: bool,
}

impl FragmentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec types serialize")
    }

    /// Build (but do not validate) the described fragment.
    pub fn build(&self) -> Result<LoadedFragment> {
        let sys = Systems(&self.systems);
        SpaceLayout::new(self.systems.clone())?;
        match (&self.initial, &self.choi) {
            (Some(init), None) => {
                let (rho, max_entangled_init) = match init {
                    InitialSpec::MaxEntangled { max_entangled: [a, e] } => {
                        let (a, e) = (sys.get(a)?, sys.get(e)?);
                        if a.dim != e.dim {
                            return Err(Error::InvalidDimension(format!("{a} and {e} differ in dimension")));
                        }
                        let d = a.dim as f64;
                        (LabeledOperator::max_entangled_unnormalized(a, e)?.scale(1.0 / d), true)
                    }
                    InitialSpec::Matrix { matrix, systems } => {
                        let layout = SpaceLayout::new(sys.all(systems)?)?;
                        (LabeledOperator::new(layout, matrix_from_literal(matrix)?)?, false)
                    }
                };
                let steps = self.steps.iter().map(|s| sys.channel(s)).collect::<Result<Vec<_>>>()?;
                Ok(LoadedFragment { fragment: build_fragment(&rho, &steps)?, max_entangled_init })
            }
            (None, Some(choi)) => {
                let slots = self
                    .slots
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("a raw `choi` needs `slots`".into()))?;
                let shape = sys.shape(slots)?;
                let j = LabeledOperator::new(shape.layout(), matrix_from_literal(choi)?)?;
                Ok(LoadedFragment { fragment: CircuitFragment::new(shape, j)?, max_entangled_init: false })
            }
            _ => Err(Error::InvalidInput("give exactly one of `initial` (with `steps`) or `choi`".into())),
        }
    }
}

impl TesterSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec types serialize")
    }

    pub fn build(&self) -> Result<InteractiveMeasurement<f64>> {
        if let Some(preset) = self.preset {
            let us = self.unitaries.iter().map(matrix_from_literal).collect::<Result<Vec<_>>>()?;
            let d = match (self.d, us.first()) {
                (Some(d), _) => d,
                (None, Some(u)) => u.rows(),
                (None, None) => 2,
            };
            let id = Matrix::identity(d);
            let (u, v) = match us.as_slice() {
                [] => (&id, &id),
                [u, v] => (u, v),
                _ => return Err(Error::InvalidInput("a preset takes zero or two unitaries".into())),
            };
            return match preset {
                Preset::CcIndicator => cc_indicator(u, v),
                Preset::DcIndicator => dc_indicator(u, v),
            };
        }
        let sys = Systems(&self.systems);
        SpaceLayout::new(self.systems.clone())?;
        let shape = match &self.slots {
            Some(s) => sys.shape(s)?,
            None => {
                let d = sys.get("A")?.dim;
                FragmentShape::causal_map(d)
            }
        };
        let lams = self.interventions.iter().map(|s| sys.channel(s)).collect::<Result<Vec<_>>>()?;
        let layout = SpaceLayout::new(sys.all(&self.povm_systems)?)?;
        let povm = self
            .povm
            .iter()
            .map(|m| LabeledOperator::new(layout.clone(), matrix_from_literal(m)?))
            .collect::<Result<Vec<_>>>()?;
        build_tester(&shape, &lams, &povm)
    }
}
