use super::{candidate_mutations, EngineError, MutationKind, MutationVector};
use crate::model::Ceremony;
use crate::term::RoleId;

/// Named family of human behaviors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Follows the script exactly.
    Compliant,
    /// Omits one check.
    SkipProne,
    /// Gets one check or one transcription wrong.
    SlipProne,
    /// Accepts one decision blindly or gives away one secret.
    Deceived,
}

pub fn behavior_preset(name: &str) -> Result<Preset, EngineError> {
    match name {
        "compliant" => Ok(Preset::Compliant),
        "skip_prone" => Ok(Preset::SkipProne),
        "slip_prone" => Ok(Preset::SlipProne),
        "deceived" => Ok(Preset::Deceived),
        _ => Err(EngineError::UnknownPreset(name.to_string())),
    }
}

impl Preset {
    pub fn kinds(self) -> &'static [MutationKind] {
        match self {
            Preset::Compliant => &[],
            Preset::SkipProne => &[MutationKind::SkipCheck],
            Preset::SlipProne => &[MutationKind::MisperformCheck, MutationKind::TranscribeError],
            Preset::Deceived => &[MutationKind::BlindAccept, MutationKind::DiscloseSecret],
        }
    }

    /// Mutation vectors the preset stands for, restricted to `role` if given.
    pub fn vectors(self, c: &Ceremony, role: Option<&RoleId>) -> Vec<MutationVector> {
        if self == Preset::Compliant {
            return vec![MutationVector::new()];
        }
        let roles = role.map(std::slice::from_ref);
        candidate_mutations(c, self.kinds(), roles)
            .into_iter()
            .map(|m| MutationVector::from([m]))
            .collect()
    }
}
