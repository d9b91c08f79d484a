import pytest

from detlens import (Box, Category, Dataset, Detection, DetectionSet, EvalConfig,
                     GroundTruth, ImageMeta)


def make_dataset(gts, n_categories=3, image_size=200, n_images=None, image_extras=None):
    """gts: list of (id, image_id, category_id, (x, y, w, h)) tuples, with an
    optional fifth element for is_crowd. Small hand fixtures only."""
    image_extras = image_extras or {}
    instances = []
    max_image = 1
    for spec in gts:
        gt_id, image_id, cat, box = spec[:4]
        crowd = bool(spec[4]) if len(spec) > 4 else False
        b = Box(*map(float, box))
        instances.append(GroundTruth(id=gt_id, image_id=image_id, category_id=cat,
                                     box=b, is_crowd=crowd, area=b.area))
        max_image = max(max_image, image_id)
    n_images = n_images or max_image
    images = [ImageMeta(id=i, width=image_size, height=image_size,
                        **image_extras.get(i, {}))
              for i in range(1, n_images + 1)]
    categories = [Category(id=c, name=f"class_{c:02d}")
                  for c in range(1, n_categories + 1)]
    return Dataset(categories, images, instances)


def make_dets(dets):
    """dets: list of (image_id, category_id, score, (x, y, w, h)) tuples;
    ordinals follow list order."""
    out = []
    for i, (image_id, cat, score, box) in enumerate(dets):
        out.append(Detection(ordinal=i, image_id=image_id, category_id=cat,
                             score=float(score), box=Box(*map(float, box))))
    return DetectionSet(out)


@pytest.fixture
def config():
    return EvalConfig()


@pytest.fixture
def hand_pr_world():
    """Two GT of one category; a hit, a stray, and a second hit in score
    order. The AP of this arrangement is known in closed form."""
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 1, (60, 60, 20, 20))], n_categories=1)
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 1, 0.8, (120, 120, 20, 20)),
                      (1, 1, 0.7, (60, 60, 20, 20))])
    return dets, gts
