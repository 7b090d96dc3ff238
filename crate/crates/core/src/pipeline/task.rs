use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassLabel, ManifestEntry};
use crate::{Error, Result};

/// Output labels of every binary task, in class-index order. The order is
/// lexicographic, so argmax ties resolve to the smaller label.
pub const BINARY_LABELS: [&str; 2] = ["negative", "positive"];
pub const NEGATIVE: usize = 0;
pub const POSITIVE: usize = 1;

/// A binary diagnosis task: which recording classes count as positive and
/// which as negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u32,
    pub name: String,
    pub positive_classes: Vec<ClassLabel>,
    pub negative_classes: Vec<ClassLabel>,
    #[serde(default)]
    pub modality: String,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.positive_classes.is_empty() || self.negative_classes.is_empty() {
            return Err(Error::arg(format!("task {}: both sides need at least one class", self.task_id)));
        }
        if let Some(c) = self.positive_classes.iter().find(|c| self.negative_classes.contains(c)) {
            return Err(Error::arg(format!("task {}: class {c} is on both sides", self.task_id)));
        }
        Ok(())
    }

    /// Binary label of a recording class, if the task uses it.
    pub fn label_of(&self, class: ClassLabel) -> Option<usize> {
        if self.positive_classes.contains(&class) {
            Some(POSITIVE)
        } else if self.negative_classes.contains(&class) {
            Some(NEGATIVE)
        } else {
            None
        }
    }
}

fn parse_tasks(text: &str) -> Result<Vec<TaskSpec>> {
    let tasks: Vec<TaskSpec> = serde_json::from_str(text)?;
    for t in &tasks {
        t.validate()?;
    }
    Ok(tasks)
}

/// The five shipped tasks.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    parse_tasks(include_str!("../../data/tasks.json")).expect("shipped task file is valid")
}

/// Task definitions from a JSON file with the same layout as the shipped one.
pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tasks(&text)
}

pub fn builtin_task(task_id: u32) -> Result<TaskSpec> {
    builtin_tasks()
        .into_iter()
        .find(|t| t.task_id == task_id)
        .ok_or_else(|| Error::arg(format!("unknown task {task_id} (expected 1-5)")))
}

/// Entries of one task with their binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task: TaskSpec,
    pub entries: Vec<ManifestEntry>,
    pub labels: Vec<usize>,
}

impl TaskDataset {
    /// `(negative, positive)` clip counts.
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == POSITIVE).count();
        (self.labels.len() - pos, pos)
    }
}

/// Keeps the entries whose class belongs to either side of `task`.
pub fn build_task(entries: &[ManifestEntry], task: &TaskSpec) -> Result<TaskDataset> {
    task.validate()?;
    let (entries, labels): (Vec<_>, Vec<_>) = entries
        .iter()
        .filter_map(|e| task.label_of(e.label).map(|l| (e.clone(), l)))
        .unzip();
    let out = TaskDataset {
        task: task.clone(),
        entries,
        labels,
    };
    let (neg, pos) = out.counts();
    for (n, side, classes) in [(pos, "positive", &task.positive_classes), (neg, "negative", &task.negative_classes)] {
        if n == 0 {
            let names: Vec<&str> = classes.iter().map(|c| c.as_str()).collect();
            return Err(Error::TaskData(format!(
                "task {}: no {side} recordings (classes {})",
                task.task_id,
                names.join(", ")
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(i: usize, label: ClassLabel) -> ManifestEntry {
        ManifestEntry {
            path: format!("{i}.wav"),
            label,
            user_id: format!("u{i}"),
            split: None,
        }
    }

    #[test]
    fn shipped_tasks() {
        let t = builtin_tasks();
        assert_eq!(t.iter().map(|t| t.task_id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(t[0].positive_classes.len(), 3);
        assert_eq!(t[0].negative_classes.len(), 4);
        assert!(builtin_task(6).is_err());
    }

    #[test]
    fn task5_filters_and_relabels() {
        let all: Vec<ManifestEntry> = ClassLabel::ALL.iter().enumerate().map(|(i, &c)| entry(i, c)).collect();
        let d = build_task(&all, &builtin_task(5).unwrap()).unwrap();
        let kept: Vec<ClassLabel> = d.entries.iter().map(|e| e.label).collect();
        assert_eq!(kept, vec![ClassLabel::AsthmaCough, ClassLabel::CovidNegCough, ClassLabel::HealthyCough]);
        assert_eq!(d.labels, vec![POSITIVE, NEGATIVE, NEGATIVE]);
        assert_eq!(d.counts(), (2, 1));
        assert!(!kept.contains(&ClassLabel::CovidBreath));
    }

    #[test]
    fn missing_side_is_a_task_data_error() {
        let e = vec![entry(0, ClassLabel::HealthyBreath), entry(1, ClassLabel::CovidCough)];
        match build_task(&e, &builtin_task(4).unwrap()) {
            Err(Error::TaskData(m)) => assert!(m.contains("positive") && m.contains("asthma_breath")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overlapping_sides_rejected() {
        let mut t = builtin_task(2).unwrap();
        t.negative_classes.push(ClassLabel::CovidCough);
        assert!(t.validate().is_err());
    }
}
