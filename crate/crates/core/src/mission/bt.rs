use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    Failure,
}

/// Executes leaves on behalf of the tree.
pub trait LeafRunner<L> {
    fn action(&mut self, leaf: &L) -> Status;
    /// Conditions must not mutate observable state.
    fn condition(&mut self, leaf: &L) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BtNode<L> {
    Sequence { children: Vec<BtNode<L>>, active: usize },
    Fallback { children: Vec<BtNode<L>>, active: usize },
    Action { leaf: L },
    Condition { leaf: L },
}

impl<L> BtNode<L> {
    pub fn sequence(children: Vec<BtNode<L>>) -> Self {
        BtNode::Sequence { children, active: 0 }
    }

    pub fn fallback(children: Vec<BtNode<L>>) -> Self {
        BtNode::Fallback { children, active: 0 }
    }

    pub fn action(leaf: L) -> Self {
        BtNode::Action { leaf }
    }

    pub fn condition(leaf: L) -> Self {
        BtNode::Condition { leaf }
    }

    pub fn children(&self) -> &[BtNode<L>] {
        match self {
            BtNode::Sequence { children, .. } | BtNode::Fallback { children, .. } => children,
            _ => &[],
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&L> {
        match self {
            BtNode::Action { leaf } | BtNode::Condition { leaf } => vec![leaf],
            _ => self.children().iter().flat_map(|c| c.leaves()).collect(),
        }
    }

    /// A Running child is resumed on the next tick; composites rewind once
    /// they finish.
    pub fn tick<R: LeafRunner<L>>(&mut self, runner: &mut R) -> Status {
        match self {
            BtNode::Action { leaf } => runner.action(leaf),
            BtNode::Condition { leaf } => {
                if runner.condition(leaf) {
                    Status::Success
                } else {
                    Status::Failure
                }
            }
            BtNode::Sequence { children, active } => {
                while *active < children.len() {
                    match children[*active].tick(runner) {
                        Status::Running => return Status::Running,
                        Status::Failure => {
                            *active = 0;
                            return Status::Failure;
                        }
                        Status::Success => *active += 1,
                    }
                }
                *active = 0;
                Status::Success
            }
            BtNode::Fallback { children, active } => {
                while *active < children.len() {
                    match children[*active].tick(runner) {
                        Status::Running => return Status::Running,
                        Status::Success => {
                            *active = 0;
                            return Status::Success;
                        }
                        Status::Failure => *active += 1,
                    }
                }
                *active = 0;
                Status::Failure
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Leaf = (id, scripted results); the runner counts ticks per id.
    struct Script {
        results: Vec<Vec<Status>>,
        ticks: Vec<usize>,
    }

    impl LeafRunner<usize> for Script {
        fn action(&mut self, id: &usize) -> Status {
            let n = self.ticks[*id];
            self.ticks[*id] += 1;
            let r = &self.results[*id];
            r[n.min(r.len() - 1)]
        }

        fn condition(&mut self, id: &usize) -> bool {
            self.action(id) == Status::Success
        }
    }

    fn script(results: Vec<Vec<Status>>) -> Script {
        let n = results.len();
        Script { results, ticks: vec![0; n] }
    }

    use Status::*;

    #[test]
    fn sequence_and_fallback_basics() {
        let mut s = script(vec![vec![Success], vec![Success]]);
        assert_eq!(BtNode::sequence(vec![BtNode::action(0), BtNode::action(1)]).tick(&mut s), Success);
        let mut s = script(vec![vec![Failure], vec![Success]]);
        assert_eq!(BtNode::fallback(vec![BtNode::action(0), BtNode::action(1)]).tick(&mut s), Success);
        let mut s = script(vec![vec![Failure], vec![Success]]);
        assert_eq!(BtNode::sequence(vec![BtNode::action(0), BtNode::action(1)]).tick(&mut s), Failure);
        assert_eq!(s.ticks, vec![1, 0]);
        assert_eq!(BtNode::<usize>::sequence(vec![]).tick(&mut s), Success);
    }

    #[test]
    fn running_child_is_resumed() {
        let mut s = script(vec![vec![Success], vec![Running, Running, Success], vec![Success]]);
        let mut tree = BtNode::sequence(vec![BtNode::action(0), BtNode::action(1), BtNode::action(2)]);
        assert_eq!(tree.tick(&mut s), Running);
        assert_eq!(s.ticks, vec![1, 1, 0]);
        assert_eq!(tree.tick(&mut s), Running);
        assert_eq!(tree.tick(&mut s), Success);
        assert_eq!(s.ticks, vec![1, 3, 1]);
    }

    #[test]
    fn fallback_runs_recovery_after_failure() {
        let mut s = script(vec![vec![Failure], vec![Running, Success]]);
        let mut tree = BtNode::fallback(vec![BtNode::action(0), BtNode::action(1)]);
        assert_eq!(tree.tick(&mut s), Running);
        assert_eq!(tree.tick(&mut s), Success);
        assert_eq!(s.ticks, vec![1, 2]);
    }

    #[test]
    fn condition_leaf() {
        let mut s = script(vec![vec![Failure], vec![Success]]);
        let mut tree = BtNode::sequence(vec![BtNode::condition(0), BtNode::action(1)]);
        assert_eq!(tree.tick(&mut s), Failure);
        assert_eq!(s.ticks, vec![1, 0]);
    }
}
