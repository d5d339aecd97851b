"""Integer label sets shared by the generator, the pipeline and the metrics.

Mesh part ids double as draw order: where faces overlap, the larger id wins.
"""

# body-mesh part ids (0 = not covered)
TORSO = 1
FACE = 2
HAIR = 3
L_UPPER_ARM = 4
L_LOWER_ARM = 5
L_HAND = 6
R_UPPER_ARM = 7
R_LOWER_ARM = 8
R_HAND = 9
L_UPPER_LEG = 10
L_LOWER_LEG = 11
R_UPPER_LEG = 12
R_LOWER_LEG = 13
SKIRT_PART = 14

PART_NAMES = {
    TORSO: "torso",
    FACE: "face",
    HAIR: "hair",
    L_UPPER_ARM: "l_upper_arm",
    L_LOWER_ARM: "l_lower_arm",
    L_HAND: "l_hand",
    R_UPPER_ARM: "r_upper_arm",
    R_LOWER_ARM: "r_lower_arm",
    R_HAND: "r_hand",
    L_UPPER_LEG: "l_upper_leg",
    L_LOWER_LEG: "l_lower_leg",
    R_UPPER_LEG: "r_upper_leg",
    R_LOWER_LEG: "r_lower_leg",
    SKIRT_PART: "skirt",
}

LEFT_ARM_PARTS = (L_UPPER_ARM, L_LOWER_ARM, L_HAND)
RIGHT_ARM_PARTS = (R_UPPER_ARM, R_LOWER_ARM, R_HAND)

# garment-level segmentation labels
SEG_BACKGROUND = 0
SEG_SKIN = 1
SEG_TOP = 2
SEG_PANTS = 3
SEG_SKIRT = 4
SEG_FACE = 5
SEG_HAIR = 6
SEG_HANDS = 7

SEG_NAMES = {
    SEG_BACKGROUND: "background",
    SEG_SKIN: "skin",
    SEG_TOP: "top",
    SEG_PANTS: "pants",
    SEG_SKIRT: "skirt",
    SEG_FACE: "face",
    SEG_HAIR: "hair",
    SEG_HANDS: "hands",
}

GARMENT_LABELS = (SEG_TOP, SEG_PANTS, SEG_SKIRT)
LOOSE_GARMENT_LABELS = (SEG_SKIRT,)
# copied from the query unchanged during transfer
PROTECTED_LABELS = (SEG_FACE, SEG_HAIR, SEG_HANDS)
