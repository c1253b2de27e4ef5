use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::image::GrayImage;

/// Seeds whose pixels lie within this Chebyshev distance are merged.
const SEED_MERGE_RADIUS: i64 = 2;

/// One watershed basin: its label and pixels in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub label: u32,
    pub pixels: Vec<(u32, u32)>,
}

const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Chessboard distance from each foreground pixel to the nearest background
/// pixel, treating everything outside the image as background.
pub fn chebyshev_distance(binary: &GrayImage) -> Vec<u32> {
    let (w, h) = binary.dimensions();
    let px = binary.pixels();
    let mut d: Vec<u32> = px.iter().map(|&v| if v > 127.5 { u32::MAX } else { 0 }).collect();
    let get = |d: &[u32], x: i64, y: i64| -> u32 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0
        } else {
            d[y as usize * w + x as usize]
        }
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let m = [(-1, 0), (-1, -1), (0, -1), (1, -1)]
                .iter()
                .map(|&(dx, dy)| get(&d, x + dx, y + dy))
                .min()
                .unwrap_or(0);
            d[i] = d[i].min(m.saturating_add(1));
        }
    }
    for y in (0..h as i64).rev() {
        for x in (0..w as i64).rev() {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let m = [(1, 0), (1, 1), (0, 1), (-1, 1)]
                .iter()
                .map(|&(dx, dy)| get(&d, x + dx, y + dy))
                .min()
                .unwrap_or(0);
            d[i] = d[i].min(m.saturating_add(1));
        }
    }
    d
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn component_ids(dist: &[u32], w: usize, h: usize) -> Vec<usize> {
    let mut id = vec![usize::MAX; w * h];
    let mut stack = Vec::new();
    let mut next = 0;
    for start in 0..w * h {
        if dist[start] == 0 || id[start] != usize::MAX {
            continue;
        }
        id[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if dist[j] > 0 && id[j] == usize::MAX {
                    id[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    id
}

/// Marker-controlled watershed on the distance transform of the foreground.
///
/// Seeds are regional-maximum plateaus of the distance map; plateaus of one
/// connected component closer than two pixels (Chebyshev) share a seed.
/// Basins are flooded from the seeds in order of decreasing distance,
/// first-come first-served on ties. Every
/// foreground pixel receives exactly one label; labels are numbered from 1 in
/// raster order of their first seed pixel.
pub fn segment_watershed(binary: &GrayImage) -> Vec<Region> {
    let (w, h) = binary.dimensions();
    let dist = chebyshev_distance(binary);
    let inb = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64;

    // Regional-maximum plateaus.
    let mut plateau = vec![usize::MAX; w * h];
    let mut n_plateaus = 0usize;
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut members = Vec::new();
    for start in 0..w * h {
        if dist[start] == 0 || visited[start] {
            continue;
        }
        let level = dist[start];
        let mut is_max = true;
        members.clear();
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if !inb(nx, ny) {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if dist[j] > level {
                    is_max = false;
                } else if dist[j] == level && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if is_max {
            for &i in &members {
                plateau[i] = n_plateaus;
            }
            n_plateaus += 1;
        }
    }

    // Merge plateaus of the same component that come within the merge radius.
    let component = component_ids(&dist, w, h);
    let mut parent: Vec<usize> = (0..n_plateaus).collect();
    for i in 0..w * h {
        let a = plateau[i];
        if a == usize::MAX {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -SEED_MERGE_RADIUS..=SEED_MERGE_RADIUS {
            for dx in -SEED_MERGE_RADIUS..=SEED_MERGE_RADIUS {
                let (nx, ny) = (x + dx, y + dy);
                if !inb(nx, ny) {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let b = plateau[j];
                if b != usize::MAX && b != a && component[j] == component[i] {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
    }

    // Number seeds in raster order and flood.
    let mut seed_label = vec![0u32; n_plateaus];
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut heap: BinaryHeap<(u32, Reverse<u64>, usize, u32)> = BinaryHeap::new();
    let mut counter = 0u64;
    for i in 0..w * h {
        if plateau[i] == usize::MAX {
            continue;
        }
        let root = find(&mut parent, plateau[i]);
        if seed_label[root] == 0 {
            next += 1;
            seed_label[root] = next;
        }
        heap.push((dist[i], Reverse(counter), i, seed_label[root]));
        counter += 1;
    }
    while let Some((_, _, i, label)) = heap.pop() {
        if labels[i] != 0 {
            continue;
        }
        labels[i] = label;
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (x + dx, y + dy);
            if !inb(nx, ny) {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if dist[j] > 0 && labels[j] == 0 {
                heap.push((dist[j], Reverse(counter), j, label));
                counter += 1;
            }
        }
    }

    let mut regions: Vec<Region> = (1..=next)
        .map(|label| Region {
            label,
            pixels: Vec::new(),
        })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            regions[l as usize - 1].pixels.push(((i % w) as u32, (i / w) as u32));
        }
    }
    regions
}
