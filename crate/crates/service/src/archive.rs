use diagraph_core::formats::ExportFile;

/// Packs files into a tar archive with fixed metadata (mode 0644, owner 0,
/// mtime 0), so equal inputs give identical bytes.
pub fn tar_archive(files: &[ExportFile]) -> std::io::Result<Vec<u8>> {
    let mut builder = tar::Builder::new(Vec::new());
    for f in files {
        let mut header = tar::Header::new_ustar();
        header.set_path(&f.path)?;
        header.set_size(f.bytes.len() as u64);
        header.set_mode(0o644);
        header.set_uid(0);
        header.set_gid(0);
        header.set_mtime(0);
        header.set_entry_type(tar::EntryType::Regular);
        header.set_cksum();
        builder.append(&header, f.bytes.as_slice())?;
    }
    builder.into_inner()
}
