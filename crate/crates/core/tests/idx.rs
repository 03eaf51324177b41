use latent_workbench::forward::idx::{dataset_from_idx, encode_idx, parse_images, parse_labels};
use latent_workbench::forward::{load_idx, Mode};
use latent_workbench::Error;
use proptest::prelude::*;

/// Two 2×2 images and their labels, written out byte by byte.
const IMAGES: [u8; 24] = [
    0x00, 0x00, 0x08, 0x03, // magic
    0x00, 0x00, 0x00, 0x02, // n = 2
    0x00, 0x00, 0x00, 0x02, // rows = 2
    0x00, 0x00, 0x00, 0x02, // cols = 2
    0, 255, 128, 1, // image 0
    10, 20, 30, 40, // image 1
];
const LABELS: [u8; 10] = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3];

fn format_offset(e: Error) -> u64 {
    match e {
        Error::Format { offset, .. } => offset,
        other => panic!("expected a format error, got {other}"),
    }
}

#[test]
fn fixture_parses_to_known_values() {
    let imgs = parse_images(&IMAGES).unwrap();
    assert_eq!((imgs.rows, imgs.cols), (2, 2));
    assert_eq!(imgs.images, vec![vec![0, 255, 128, 1], vec![10, 20, 30, 40]]);
    assert_eq!(parse_labels(&LABELS).unwrap(), vec![7, 3]);

    let data = dataset_from_idx(&IMAGES, &LABELS).unwrap();
    assert_eq!(data.mode, Mode::PixelImage);
    assert_eq!(data.len(), 2);
    assert_eq!(data.image_size(), 2);
    let px = data.images[0].pixels.data();
    assert_eq!(px, &[0.0, 1.0, 128.0 / 255.0, 1.0 / 255.0]);
    assert_eq!(data.truths(), vec![7.0, 3.0]);
}

#[test]
fn encoder_reproduces_fixture_bytes() {
    let (img, lab) = encode_idx(2, 2, &[vec![0, 255, 128, 1], vec![10, 20, 30, 40]], &[7, 3]);
    assert_eq!(img, IMAGES);
    assert_eq!(lab, LABELS);
}

#[test]
fn bad_magic_is_rejected_at_offset_zero() {
    let mut img = IMAGES;
    img[3] = 0x01;
    assert_eq!(format_offset(parse_images(&img).err().unwrap()), 0);
    let mut lab = LABELS;
    lab[3] = 0x03;
    assert_eq!(format_offset(parse_labels(&lab).err().unwrap()), 0);
}

#[test]
fn truncation_reports_the_end_of_input() {
    // Pixel data cut short by one byte.
    let short = &IMAGES[..23];
    assert_eq!(format_offset(parse_images(short).err().unwrap()), 23);
    // Header cut inside the column count.
    assert_eq!(format_offset(parse_images(&IMAGES[..14]).err().unwrap()), 14);
    // Labels missing their last byte.
    assert_eq!(format_offset(parse_labels(&LABELS[..9]).err().unwrap()), 9);
    // Empty input.
    assert_eq!(format_offset(parse_labels(&[]).err().unwrap()), 0);
}

#[test]
fn fewer_labels_than_images_is_rejected() {
    let (_, lab) = encode_idx(2, 2, &[], &[7]);
    assert!(matches!(dataset_from_idx(&IMAGES, &lab), Err(Error::Format { .. })));
}

#[test]
fn huge_declared_count_does_not_overflow() {
    let mut img = IMAGES.to_vec();
    img[4..16].copy_from_slice(&[0xff; 12]);
    assert!(matches!(parse_images(&img), Err(Error::Format { .. })));
}

#[test]
fn load_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img.idx"), dir.path().join("lab.idx"));
    std::fs::write(&ip, IMAGES).unwrap();
    std::fs::write(&lp, LABELS).unwrap();
    let data = load_idx(&ip, &lp).unwrap();
    assert_eq!(data.len(), 2);
    assert!(matches!(
        load_idx(&dir.path().join("missing"), &lp),
        Err(Error::Io { .. })
    ));
}

proptest! {
    #[test]
    fn encoded_files_parse_back(
        side in 1usize..6,
        raw in proptest::collection::vec(any::<u8>(), 0..200),
    ) {
        let per = side * side;
        let images: Vec<Vec<u8>> = raw.chunks_exact(per).map(<[u8]>::to_vec).collect();
        let labels: Vec<u8> = (0..images.len()).map(|i| (i % 10) as u8).collect();
        let (img, lab) = encode_idx(side, side, &images, &labels);
        let parsed = parse_images(&img).unwrap();
        prop_assert_eq!(parsed.images, images);
        prop_assert_eq!(parse_labels(&lab).unwrap(), labels);
        // Any strict prefix of a non-empty file fails with its own length
        // as the offset.
        if !raw.is_empty() && img.len() > 16 {
            let cut = img.len() - 1;
            match parse_images(&img[..cut]) {
                Err(Error::Format { offset, .. }) => prop_assert_eq!(offset, cut as u64),
                other => prop_assert!(false, "expected truncation, got {:?}", other.map(|p| p.images.len())),
            }
        }
    }
}
