from salientbox import BoundingBox, BoxDecoder, DecoderConfig, EncoderConfig, SubitizingOutput, encode_gt


def main() -> None:
    encoder = EncoderConfig.for_profile(224)
    boxes = [
        BoundingBox.from_corners(16, 48, 80, 144),
        BoundingBox.from_corners(128, 32, 208, 128),
    ]
    saliency = encode_gt(boxes, encoder)

    decoder = BoxDecoder(DecoderConfig.for_profile(224, box_rescale=True))
    result = decoder.detect(saliency, SubitizingOutput(category="2", confidence=0.9))

    print("Branch:", result.branch.value)
    print("Boxes:")
    for scored in result.boxes:
        x0, y0, x1, y1 = scored.box.corners()
        print(f"- ({x0:.1f}, {y0:.1f}) -> ({x1:.1f}, {y1:.1f}) score={scored.score:.3f}")
    print("Trace:")
    for step in result.trace.steps:
        print(f"- {step}")


if __name__ == "__main__":
    main()
