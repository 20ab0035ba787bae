from django.conf import settings

DEFAULTS = {
    "MANIFEST": None,
    "OUT": "saliency_out",
    "SEED": 0,
    "JOBS": None,
    "GT_SIGMA": None,
    "TRAIN_FRACTION": 0.8,
    "POS_PER_IMAGE": 10,
    "NEG_PER_IMAGE": 10,
    "POS_PERCENTILE": 0.05,
    "NEG_PERCENTILE": 0.30,
    "BORDER_MARGIN": 10,
    "SIFT_OCTAVES": 4,
    "SIFT_SCALES": 3,
    "SIFT_BASE_SIGMA": 1.6,
    "SIFT_CONTRAST_THRESHOLD": 0.03,
    "SIFT_EDGE_RATIO": 10.0,
    "SVM_GAMMA": 0.8,
    "SVM_COST": 8.0,
    "SVM_TOLERANCE": 1e-3,
    "SVM_MAX_PASSES": 200,
    "TREE_MIN_LEAF": 2,
    "TREE_CONFIDENCE": 0.25,
    "KNN_K": 9,
    "NB_WINDOW": 0.5,
    "NB_POINTS": 100,
    "BOOST_ROUNDS": 10,
    "CV_FOLDS": 5,
    "PREDICT_STRIDE": 1,
    "HORIZON_FILE": None,
    "EXCLUDE_GROUPS": (),
    "LOG_RUNS": True,
    "DEBUG_MODE": False,
}


def get_setting(name: str):
    user_settings = getattr(settings, "SALIENCY", {})
    if name in user_settings:
        return user_settings[name]
    return DEFAULTS.get(name)
