use dualvol::bodies::{random_body, GeneratorSpec};
use dualvol::functionals::{GaussianProfile, LayerCakeGrid, SphereProfile};
use dualvol::quad::{sphere_rule, GaussianSample, Scheme};

fn main() {
    let body = random_body(&GeneratorSpec::symmetric_vpolytope(3, 20), 42).unwrap();
    let rule = sphere_rule(3, Scheme::Fibonacci, 20_000, 0).unwrap();
    let sp = SphereProfile::new(&body, &rule).unwrap();
    let sample = GaussianSample::new(3, 200_000, 4242);
    let gp = GaussianProfile::new(&body, &sample).unwrap();
    let grid = LayerCakeGrid::default();
    for q in [-1.0, 1.0, 1.5, 2.5] {
        let s = sp.dual_querm(q);
        let s_half = sp.dual_querm_half(q);
        let g = gp.dual_querm(q).unwrap();
        let (l, d) = gp.layer_cake_detailed(q, &grid).unwrap();
        let ds = (s.value - s_half).abs();
        println!("q={q}: sphere={:.6} (disc {:.1e}) gauss={:.6}±{:.1e} lc={:.6}±{:.1e} tail_bound={:.1e}", 
            s.value, ds, g.value, g.stderr, l.value, l.stderr, d.tail_bound);
        println!("   |s-g|={:.2e} vs 3σ={:.2e}   |g-l|={:.2e} vs 3σ={:.2e}   |s-l|={:.2e} vs 3σ={:.2e}",
            (s.value-g.value).abs(), 3.0*(ds+g.stderr),
            (g.value-l.value).abs(), 3.0*(g.stderr+l.stderr),
            (s.value-l.value).abs(), 3.0*(ds+l.stderr));
    }
}
