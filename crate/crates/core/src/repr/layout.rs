use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{
    FACE_DIM, FACE_OFFSET, FRAME_DIM, JOINT_POS_OFFSET, JOINT_ROT_OFFSET, JOINT_VEL_OFFSET,
    NUM_JOINTS, NUM_PARTS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Global,
    Face,
    Head,
    Spine,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    LeftHand,
    RightHand,
}

impl Part {
    pub const ALL: [Part; NUM_PARTS] = [
        Part::Global,
        Part::Face,
        Part::Head,
        Part::Spine,
        Part::LeftArm,
        Part::RightArm,
        Part::LeftLeg,
        Part::RightLeg,
        Part::LeftHand,
        Part::RightHand,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Part> {
        Part::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Part::Global => "global",
            Part::Face => "face",
            Part::Head => "head",
            Part::Spine => "spine",
            Part::LeftArm => "left_arm",
            Part::RightArm => "right_arm",
            Part::LeftLeg => "left_leg",
            Part::RightLeg => "right_leg",
            Part::LeftHand => "left_hand",
            Part::RightHand => "right_hand",
        }
    }

    /// Body part that owns a non-root joint (SMPL-X body order, hands at 22..51).
    pub fn of_joint(joint: usize) -> Option<Part> {
        Some(match joint {
            0 => Part::Global,
            3 | 6 | 9 => Part::Spine,
            12 | 15 => Part::Head,
            13 | 16 | 18 | 20 => Part::LeftArm,
            14 | 17 | 19 | 21 => Part::RightArm,
            1 | 4 | 7 | 10 => Part::LeftLeg,
            2 | 5 | 8 | 11 => Part::RightLeg,
            22..=36 => Part::LeftHand,
            37..=51 => Part::RightHand,
            _ => return None,
        })
    }
}

/// Mapping from each body part to the index ranges it owns in the 669-vector.
/// Ranges within a part are sorted and non-adjacent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartLayout {
    ranges: [Vec<Range<usize>>; NUM_PARTS],
    owner: Vec<Part>,
}

impl PartLayout {
    pub fn ranges(&self, part: Part) -> &[Range<usize>] {
        &self.ranges[part.index()]
    }

    pub fn size(&self, part: Part) -> usize {
        self.ranges(part).iter().map(|r| r.len()).sum()
    }

    pub fn total_size(&self) -> usize {
        Part::ALL.iter().map(|&p| self.size(p)).sum()
    }

    pub fn indices(&self, part: Part) -> impl Iterator<Item = usize> + '_ {
        self.ranges(part).iter().flat_map(|r| r.clone())
    }

    /// The part owning feature index `i`, if `i < 669`.
    pub fn part_of(&self, i: usize) -> Option<Part> {
        self.owner.get(i).copied()
    }

    /// Copies a part's features out of a full frame vector, in index order.
    pub fn gather(&self, part: Part, frame: &[f64]) -> Vec<f64> {
        self.indices(part).map(|i| frame[i]).collect()
    }

    /// Writes a part's features back into a full frame vector.
    pub fn scatter(&self, part: Part, values: &[f64], frame: &mut [f64]) {
        debug_assert_eq!(values.len(), self.size(part));
        for (i, &v) in self.indices(part).zip(values) {
            frame[i] = v;
        }
    }
}

/// The fixed ten-part partition of the unified vector.
pub fn canonical_layout() -> PartLayout {
    let mut owner = vec![Part::Global; FRAME_DIM];
    for joint in 0..NUM_JOINTS {
        let part = Part::of_joint(joint).expect("every joint has a part");
        if joint > 0 {
            let p = JOINT_POS_OFFSET + 3 * (joint - 1);
            owner[p..p + 3].fill(part);
            let r = JOINT_ROT_OFFSET + 6 * (joint - 1);
            owner[r..r + 6].fill(part);
        }
        let v = JOINT_VEL_OFFSET + 3 * joint;
        owner[v..v + 3].fill(part);
    }
    owner[FACE_OFFSET..FACE_OFFSET + FACE_DIM].fill(Part::Face);

    let mut ranges: [Vec<Range<usize>>; NUM_PARTS] = Default::default();
    for (i, &part) in owner.iter().enumerate() {
        let list = &mut ranges[part.index()];
        match list.last_mut() {
            Some(last) if last.end == i => last.end = i + 1,
            _ => list.push(i..i + 1),
        }
    }
    PartLayout { ranges, owner }
}
