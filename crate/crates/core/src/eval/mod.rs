//! Graph label metrics, OOD scenario generators and detection metrics.

mod informativeness;
mod ood;

pub use informativeness::{edge_homophily, label_informativeness};
pub use ood::{
    default_ood_classes, make_feature_shift, make_label_leaveout, make_structure_shift, ood_metrics, OODReport,
    OODSplit, ShiftKind, SplitFractions, StructureShift,
};
