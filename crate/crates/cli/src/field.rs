use einfields::charts::{ChartId, MetricParams};
use einfields::field::{AnalyticMetric, MetricField};
use einfields::jet::Real;
use einfields::nn::FieldModel;
use einfields::tensor::Mat4;

/// Either a closed-form metric or a trained network.
pub enum AnyField {
    Analytic(AnalyticMetric),
    Model(Box<FieldModel>),
}

impl AnyField {
    pub fn params(&self) -> MetricParams {
        match self {
            AnyField::Analytic(a) => a.params,
            AnyField::Model(m) => m.params,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AnyField::Analytic(_) => "analytic",
            AnyField::Model(_) => "model",
        }
    }
}

impl MetricField for AnyField {
    fn chart(&self) -> ChartId {
        match self {
            AnyField::Analytic(a) => a.chart(),
            AnyField::Model(m) => m.chart(),
        }
    }
    fn eval<S: Real>(&self, x: &[S; 4]) -> Mat4<S> {
        match self {
            AnyField::Analytic(a) => a.eval(x),
            AnyField::Model(m) => m.eval(x),
        }
    }
    fn check(&self, x: &[f64; 4]) -> einfields::Result<()> {
        match self {
            AnyField::Analytic(a) => a.check(x),
            AnyField::Model(m) => m.check(x),
        }
    }
    fn in_training_box(&self, x: &[f64; 4]) -> bool {
        match self {
            AnyField::Analytic(a) => a.in_training_box(x),
            AnyField::Model(m) => m.in_training_box(x),
        }
    }
}
