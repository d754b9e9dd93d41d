//! Saves a model with its standardizer to a checksummed file, reloads it and
//! shows that predictions match exactly and that corruption is detected.

use stallcast::data::Standardizer;
use stallcast::nn::{Matrix, Model, ModelSpec};
use stallcast::persist::{load_model, model_from_bytes, model_to_bytes, save_model};

fn main() -> stallcast::Result<()> {
    let model = Model::new(ModelSpec::arch_c(), 21)?;
    let standardizer = Standardizer::identity(16);
    let dir = tempfile_dir();
    let path = dir.join("arch_c.stallmdl");
    save_model(&model, &standardizer, &path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);

    let (loaded, _) = load_model(&path)?;
    let x = Matrix::from_fn(16, 10, |f, t| ((f * 10 + t) as f64).sin());
    let before = model.predict_batch(&[&x])?[0];
    let after = loaded.predict_batch(&[&x])?[0];
    println!("{} ({size} bytes): prediction {before} before, {after} after reload", path.display());
    assert_eq!(before.to_bits(), after.to_bits());

    let mut bytes = model_to_bytes(&model, &standardizer)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    match model_from_bytes(&bytes) {
        Err(e) => println!("flipped one payload bit: {e} (exit code {})", e.exit_code()),
        Ok(_) => println!("corruption went unnoticed"),
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("stallcast-persist-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}
