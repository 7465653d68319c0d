"""Non-PSL relational baselines: average, user-page-user, shared-page KNN.

All three score test users from binary training labels and (for the
relational two) the bipartite user-page like graph. Ties always break on
canonical (lexicographic) user order so runs are deterministic.
"""

from collections import defaultdict

from .errors import DataError


def baseline_average(train_labels: dict, test_users) -> dict:
    """Every test user gets the training-label mean."""
    if not train_labels:
        raise DataError("average baseline needs a nonempty training set")
    mean = sum(train_labels.values()) / len(train_labels)
    return {u: mean for u in test_users}


def baseline_upu(likes, train_labels: dict, test_users) -> dict:
    """User-page-user two-hop averaging.

    Each page is scored with the mean label of its labeled likers (pages
    nobody labeled like get the global training mean), then each test user
    with the mean score of the pages they like (users without likes get the
    global training mean).
    """
    if not train_labels:
        raise DataError("UPU needs a nonempty training set")
    global_mean = sum(train_labels.values()) / len(train_labels)
    page_likers = defaultdict(list)
    user_pages = defaultdict(list)
    for user, page in likes:
        user_pages[user].append(page)
        if user in train_labels:
            page_likers[page].append(train_labels[user])
    scores = {}
    for user in test_users:
        pages = user_pages.get(user)
        if not pages:
            scores[user] = global_mean
            continue
        page_scores = [
            (sum(page_likers[p]) / len(page_likers[p]))
            if page_likers.get(p)
            else global_mean
            for p in pages
        ]
        scores[user] = sum(page_scores) / len(page_scores)
    return scores


def baseline_knn(likes, train_labels: dict, test_users, k: int = 5) -> dict:
    """Nearest neighbors by number of co-liked pages, label-fraction score.

    Takes the k most similar training users (fewer when fewer overlap at
    all); similarity ties break by user id. A test user sharing no page with
    any training user falls back to the global training mean, mirroring UPU.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    if not train_labels:
        raise DataError("KNN needs a nonempty training set")
    global_mean = sum(train_labels.values()) / len(train_labels)
    page_train_likers = defaultdict(list)
    user_pages = defaultdict(set)
    for user, page in likes:
        user_pages[user].add(page)
        if user in train_labels:
            page_train_likers[page].append(user)
    scores = {}
    for user in test_users:
        shared = defaultdict(int)
        for page in user_pages.get(user, ()):
            for other in page_train_likers[page]:
                if other != user:
                    shared[other] += 1
        if not shared:
            scores[user] = global_mean
            continue
        neighbors = sorted(shared, key=lambda v: (-shared[v], v))[:k]
        scores[user] = sum(train_labels[v] for v in neighbors) / len(neighbors)
    return scores


def ensemble_majority(score_maps) -> dict:
    """Majority vote over several per-user score maps.

    Each constituent votes with its thresholded label; the returned score is
    the fraction of positive votes.
    """
    score_maps = list(score_maps)
    if not score_maps:
        raise DataError("ensemble needs at least one constituent")
    users = set(score_maps[0])
    for m in score_maps[1:]:
        if set(m) != users:
            raise DataError("ensemble constituents must cover the same users")
    return {
        u: sum(1 for m in score_maps if m[u] >= 0.5) / len(score_maps)
        for u in users
    }
