//! Connected-component cleanup of a segmentation mask.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imagecore::LabelMask;

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Pixels of one connected component, found by BFS from `start`.
fn flood(
    labels: &[u8],
    w: usize,
    h: usize,
    start: usize,
    inside: impl Fn(u8) -> bool,
    nbrs: &[(isize, isize)],
    seen: &mut [bool],
) -> Vec<usize> {
    let mut comp = vec![start];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(p) = queue.pop_front() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for &(dx, dy) in nbrs {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let q = ny as usize * w + nx as usize;
            if !seen[q] && inside(labels[q]) {
                seen[q] = true;
                comp.push(q);
                queue.push_back(q);
            }
        }
    }
    comp
}

/// Removes small foreground blobs and fills holes in the remaining ones.
///
/// 8-connected components of `foreground` smaller than `min_area` take the
/// most frequent label among their 8-neighbors (ties to the smaller label).
/// Then every 4-connected region of non-foreground pixels that does not touch
/// the image border is filled with `foreground`.
pub fn postprocess(mask: &LabelMask, min_area: usize, foreground: u8) -> Result<LabelMask> {
    if foreground >= mask.classes() {
        return Err(Error::UnknownClass { class: foreground, classes: mask.classes() });
    }
    let (w, h) = (mask.width(), mask.height());
    let mut labels = mask.labels().to_vec();
    let mut seen = vec![false; labels.len()];

    for start in 0..labels.len() {
        if seen[start] || labels[start] != foreground {
            continue;
        }
        let comp = flood(&labels, w, h, start, |l| l == foreground, &N8, &mut seen);
        if comp.len() >= min_area {
            continue;
        }
        let mut votes = vec![0usize; mask.classes() as usize];
        for &p in &comp {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for &(dx, dy) in &N8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let l = labels[ny as usize * w + nx as usize];
                if l != foreground {
                    votes[l as usize] += 1;
                }
            }
        }
        // max_by_key keeps the last maximum; iterate in reverse so ties go to the smaller label
        let (winner, count) = votes
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &n)| n)
            .map(|(l, &n)| (l as u8, n))
            .unwrap_or((foreground, 0));
        if count > 0 {
            for &p in &comp {
                labels[p] = winner;
            }
        }
    }

    seen.iter_mut().for_each(|s| *s = false);
    for start in 0..labels.len() {
        if seen[start] || labels[start] == foreground {
            continue;
        }
        let comp = flood(&labels, w, h, start, |l| l != foreground, &N4, &mut seen);
        let touches_border = comp.iter().any(|&p| {
            let (x, y) = (p % w, p / w);
            x == 0 || y == 0 || x + 1 == w || y + 1 == h
        });
        if !touches_border {
            for &p in &comp {
                labels[p] = foreground;
            }
        }
    }

    LabelMask::new(w, h, mask.classes(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> LabelMask {
        let h = rows.len();
        let w = rows[0].len();
        let labels = rows.iter().flat_map(|r| r.bytes().map(|b| b - b'0')).collect();
        LabelMask::new(w, h, 3, labels).unwrap()
    }

    #[test]
    fn large_blob_unchanged() {
        let m = mask_from(&["00000", "01110", "01110", "01110", "00000"]);
        assert_eq!(postprocess(&m, 5, 1).unwrap(), m);
    }

    #[test]
    fn speck_removed() {
        let m = mask_from(&["22222", "22222", "22122", "22222", "22222"]);
        let out = postprocess(&m, 5, 1).unwrap();
        assert!(out.labels().iter().all(|&l| l == 2));
    }

    #[test]
    fn hole_filled() {
        let m = mask_from(&["0000000", "0111110", "0100110", "0111110", "0111110", "0111110", "0000000"]);
        let out = postprocess(&m, 5, 1).unwrap();
        let expect = mask_from(&["0000000", "0111110", "0111110", "0111110", "0111110", "0111110", "0000000"]);
        assert_eq!(out, expect);
    }

    #[test]
    fn border_regions_are_not_holes() {
        let m = mask_from(&["01100", "01100", "01100"]);
        assert_eq!(postprocess(&m, 0, 1).unwrap(), m);
    }

    #[test]
    fn idempotent_on_mixed_mask() {
        let m = mask_from(&["001000100", "011102220", "010100200", "011100000", "000001010", "220000100"]);
        let once = postprocess(&m, 4, 1).unwrap();
        assert_eq!(postprocess(&once, 4, 1).unwrap(), once);
    }

    #[test]
    fn unknown_foreground() {
        let m = mask_from(&["01"]);
        assert!(matches!(postprocess(&m, 1, 3), Err(Error::UnknownClass { .. })));
    }
}
