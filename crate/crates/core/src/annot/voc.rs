//! Pascal VOC XML subset: `annotation/size/{width,height}` and
//! `annotation/object/{name,bndbox/{xmin,ymin,xmax,ymax}}`.
//!
//! VOC corners are 1-based and inclusive. A box `xmin=1, xmax=101` covers
//! 101 pixels, so it maps to the continuous span `[0, 101)`: the min corner
//! moves down by one and the max corner is kept.

use roxmltree::{Document, Node};

use super::{ingest_box, AnnotError, AnnotatedImage, ClassTable, LabeledBox, Parsed};

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(name))
}

fn required_text(node: Node<'_, '_>, name: &str, path: &str) -> Result<String, AnnotError> {
    let el = child(node, name).ok_or_else(|| AnnotError::MissingElement(format!("{path}/{name}")))?;
    Ok(el.text().unwrap_or("").trim().to_string())
}

fn required_number(node: Node<'_, '_>, name: &str, path: &str) -> Result<f64, AnnotError> {
    let text = required_text(node, name, path)?;
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or(AnnotError::InvalidNumber {
            element: format!("{path}/{name}"),
            value: text,
        })
}

fn dimension(node: Node<'_, '_>, name: &str) -> Result<u32, AnnotError> {
    let text = required_text(node, name, "annotation/size")?;
    // Some exporters write "640.0".
    text.parse::<u32>()
        .ok()
        .or_else(|| {
            text.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= u32::MAX as f64)
                .map(|v| v as u32)
        })
        .ok_or(AnnotError::InvalidNumber {
            element: format!("annotation/size/{name}"),
            value: text,
        })
}

/// Parses a VOC document, interning object names into `classes`.
pub fn parse_voc(xml: &str, classes: &mut ClassTable) -> Result<Parsed<AnnotatedImage>, AnnotError> {
    let doc = Document::parse(xml).map_err(|e| AnnotError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("annotation") {
        return Err(AnnotError::MissingElement("annotation".into()));
    }
    let size = child(root, "size").ok_or_else(|| AnnotError::MissingElement("annotation/size".into()))?;
    let width = dimension(size, "width")?;
    let height = dimension(size, "height")?;
    let source_id = child(root, "filename")
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
        .unwrap_or_default();
    let mut image = AnnotatedImage::new(width, height, source_id)?;
    let mut warnings = Vec::new();

    let objects = root
        .children()
        .filter(|c| c.is_element() && c.has_tag_name("object"));
    for (i, obj) in objects.enumerate() {
        let path = format!("annotation/object[{}]", i + 1);
        let name = required_text(obj, "name", &path)?;
        let bndbox_path = format!("{path}/bndbox");
        let bndbox = child(obj, "bndbox").ok_or_else(|| AnnotError::MissingElement(bndbox_path.clone()))?;
        let xmin = required_number(bndbox, "xmin", &bndbox_path)?;
        let ymin = required_number(bndbox, "ymin", &bndbox_path)?;
        let xmax = required_number(bndbox, "xmax", &bndbox_path)?;
        let ymax = required_number(bndbox, "ymax", &bndbox_path)?;
        let raw = [xmin - 1.0, ymin - 1.0, xmax, ymax];
        if let Some(bbox) = ingest_box(raw, width, height, &bndbox_path, &mut warnings)? {
            let class_id = classes.intern(&name);
            image.boxes.push(LabeledBox { bbox, class_id });
        }
    }
    Ok(Parsed {
        value: image,
        warnings,
    })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Writes a VOC document. Continuous corners are rounded to whole pixels and
/// shifted back to the 1-based inclusive convention.
pub fn emit_voc(image: &AnnotatedImage, classes: &ClassTable) -> String {
    let mut xml = String::from("<annotation>\n");
    if !image.source_id.is_empty() {
        xml.push_str(&format!("  <filename>{}</filename>\n", escape(&image.source_id)));
    }
    xml.push_str("  <size>\n");
    xml.push_str(&format!("    <width>{}</width>\n", image.width));
    xml.push_str(&format!("    <height>{}</height>\n", image.height));
    xml.push_str("    <depth>3</depth>\n");
    xml.push_str("  </size>\n");
    for lb in &image.boxes {
        let name = classes
            .name(lb.class_id)
            .map(str::to_string)
            .unwrap_or_else(|| lb.class_id.to_string());
        let b = lb.bbox;
        let xmin = b.x_min.round() as i64 + 1;
        let ymin = b.y_min.round() as i64 + 1;
        let xmax = (b.x_max.round() as i64).max(xmin);
        let ymax = (b.y_max.round() as i64).max(ymin);
        xml.push_str("  <object>\n");
        xml.push_str(&format!("    <name>{}</name>\n", escape(&name)));
        xml.push_str("    <bndbox>\n");
        xml.push_str(&format!("      <xmin>{xmin}</xmin>\n"));
        xml.push_str(&format!("      <ymin>{ymin}</ymin>\n"));
        xml.push_str(&format!("      <xmax>{xmax}</xmax>\n"));
        xml.push_str(&format!("      <ymax>{ymax}</ymax>\n"));
        xml.push_str("    </bndbox>\n");
        xml.push_str("  </object>\n");
    }
    xml.push_str("</annotation>\n");
    xml
}
